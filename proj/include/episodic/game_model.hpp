#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace episodic {

inline constexpr int kNumAgents = 2;

// Thrown when a game document cannot be parsed at all.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a game violates one of its structural invariants. The message
// names the offending index, e.g. "transition row (s=0,a1=1,a2=0) sums to 0.98".
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two-agent finite stochastic game <S, (A^i, r^i), p> with per-agent discount.
// gamma == 1 means the agent evaluates time-averaged utility.
//
// Rewards are stored flat in [s][a1][a2] order, transitions in
// [s][a1][a2][s_next] order. Instances are only created through make_game()
// or load_game(), so every instance satisfies the invariants; it is immutable
// afterwards.
class StochasticGame {
 public:
  struct Spec {
    std::vector<std::string> state_names;
    std::array<std::vector<std::string>, kNumAgents> action_names;
    std::array<double, kNumAgents> gammas{1.0, 1.0};
    std::array<std::vector<double>, kNumAgents> rewards;  // flat [s][a1][a2]
    std::vector<double> transitions;                      // flat [s][a1][a2][s']
  };

  int num_states() const { return static_cast<int>(spec_.state_names.size()); }
  int num_actions(int agent) const {
    return static_cast<int>(spec_.action_names[agent].size());
  }
  double gamma(int agent) const { return spec_.gammas[agent]; }
  const std::array<double, kNumAgents>& gammas() const { return spec_.gammas; }

  const std::vector<std::string>& state_names() const { return spec_.state_names; }
  const std::vector<std::string>& action_names(int agent) const {
    return spec_.action_names[agent];
  }

  double reward(int agent, int s, int a1, int a2) const {
    return spec_.rewards[agent][joint_index(s, a1, a2)];
  }
  double transition(int s, int a1, int a2, int next) const {
    return spec_.transitions[joint_index(s, a1, a2) * num_states() + next];
  }
  std::span<const double> transition_row(int s, int a1, int a2) const {
    return {spec_.transitions.data() + joint_index(s, a1, a2) * num_states(),
            static_cast<std::size_t>(num_states())};
  }

  // Stage reward matrix r^i(s, ., .) with rows indexed by agent 1's action.
  Eigen::MatrixXd reward_matrix(int agent, int s) const;

  const Spec& spec() const { return spec_; }

 private:
  friend StochasticGame make_game(Spec spec);
  explicit StochasticGame(Spec spec) : spec_(std::move(spec)) {}

  std::size_t joint_index(int s, int a1, int a2) const {
    return (static_cast<std::size_t>(s) * spec_.action_names[0].size() + a1) *
               spec_.action_names[1].size() +
           a2;
  }

  Spec spec_;
};

// Validates and builds a game. Throws ValidationError.
StochasticGame make_game(StochasticGame::Spec spec);

// Parses the JSON game document
//   {"states": [...], "actions": [[...],[...]], "gammas": [g1,g2],
//    "rewards": [r1, r2] each [s][a1][a2], "transitions": [s][a1][a2][s']}.
// Throws ParseError on malformed JSON or wrong shapes of JSON values, and
// ValidationError on invariant violations.
StochasticGame load_game(std::string_view text);
StochasticGame load_game_file(const std::string& path);
std::string game_to_json(const StochasticGame& game);

enum class StageLabel { kZeroSum, kIdenticalInterest, kPotential, kNeither };
enum class GameCase { kZeroSumSG, kIdenticalInterestSG, kSwitchingController, kUnsupported };

std::string to_string(StageLabel label);
std::string to_string(GameCase game_case);

struct StateClassification {
  StageLabel label = StageLabel::kNeither;
  // Potential over joint actions, normalized so that entry (0,0) is 0. Present
  // for identical-interest and potential states, and for zero-sum states that
  // also happen to admit one.
  std::optional<Eigen::MatrixXd> potential;
  // 0-based index of the single agent whose action alone drives p(.|s,a).
  // When the kernel ignores both agents, agent 0 is reported.
  std::optional<int> controller;
};

struct StageClassification {
  std::vector<StateClassification> states;
  GameCase overall = GameCase::kUnsupported;
};

StageClassification classify(const StochasticGame& game);

// Single-agent controller of state s, if any (0-based agent index).
std::optional<int> state_controller(const StochasticGame& game, int s);

struct ExtendedState {
  int state = 0;
  int substage = 0;

  friend bool operator==(const ExtendedState&, const ExtendedState&) = default;
};

// Enumeration of S x {0..M-1} with flat index s*M + m.
class ExtendedSpace {
 public:
  ExtendedSpace(int num_states, int episode_length);

  int num_states() const { return num_states_; }
  int episode_length() const { return episode_length_; }
  int size() const { return num_states_ * episode_length_; }

  int flat(ExtendedState x) const { return x.state * episode_length_ + x.substage; }
  int flat(int s, int m) const { return s * episode_length_ + m; }
  ExtendedState at(int flat_index) const {
    return {flat_index / episode_length_, flat_index % episode_length_};
  }
  int next_substage(int m) const { return (m + 1) % episode_length_; }
  bool is_last_substage(int m) const { return m == episode_length_ - 1; }

 private:
  int num_states_;
  int episode_length_;
};

ExtendedSpace extend(const StochasticGame& game, int episode_length);

}  // namespace episodic
