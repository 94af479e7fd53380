#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "episodic/exact_solvers.hpp"
#include "episodic/game_model.hpp"
#include "episodic/learning.hpp"
#include "episodic/random.hpp"

namespace episodic {

// Seeded environment. The substage is always stage mod M.
class Environment {
 public:
  Environment(const StochasticGame& game, int episode_length, int initial_state, Rng rng);
  // Holds a pointer to the game.
  Environment(StochasticGame&&, int, int, Rng) = delete;

  struct Step {
    int next_state = 0;
    std::array<double, kNumAgents> rewards{};
  };

  // Returns r^i(s, a) exactly and samples s' ~ p(.|s, a); advances the stage.
  Step step(int a1, int a2);

  // Restarts at `state` with stage 0; the random stream continues.
  void reset(int state);

  ExtendedState current() const { return {state_, substage_}; }
  std::uint64_t stage() const { return stage_; }

 private:
  const StochasticGame* game_;
  int episode_length_;
  int state_;
  int substage_ = 0;
  std::uint64_t stage_ = 0;
  Rng rng_;
};

struct MetricsRow {
  std::uint64_t stage = 0;
  int agent = 0;  // 1-based in CSV output
  double sup_q_err = 0.0;
  double sup_v_err = 0.0;
  double exploit_bound = 0.0;
  double exploit_exact = 0.0;
  std::uint64_t visits_min = 0;
  std::uint64_t visits_max = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

// Quantities that were not computed at a snapshot (no oracle, or off the
// exploitability cadence) are NaN and written as empty CSV fields.
struct RunMetrics {
  std::vector<MetricsRow> rows;
  std::vector<std::uint64_t> visits;  // final per extended state, flat s*M+m
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "stage,agent,sup_q_err,sup_v_err,exploit_bound,exploit_exact,visits_min,visits_max";

std::string metrics_to_csv(const RunMetrics& metrics);
// Throws std::runtime_error on a missing column or malformed field.
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

struct RunOptions {
  int episode_length = 1;
  std::uint64_t stages = 0;
  std::uint64_t seed = 0;
  int initial_state = 0;
  std::uint64_t snapshot_every = 1000;
  std::uint64_t exploit_every = 100000;  // 0 disables in-run exploitability
};

struct LearningRun {
  std::array<EpisodicQLearner, kNumAgents> agents;
  RunMetrics metrics;
  EpisodicProfile induced;
};

// Both agents follow episodic individual Q-learning for `stages` stages.
// Snapshots compare against `oracle` when given. The final snapshot always
// includes exploitability.
LearningRun run_learning(const StochasticGame& game,
                         const std::array<LearningConfig, kNumAgents>& configs,
                         const RunOptions& options,
                         const std::optional<SolutionTables>& oracle = std::nullopt);

// Learned tables packaged like solver output (method "learned").
SolutionTables tables_from_learners(const std::array<EpisodicQLearner, kNumAgents>& agents);

struct UtilityEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate of the normalized utility over a truncated horizon:
// time-averaged agents divide the reward sum by K, discounted agents weight
// stage k by (1-gamma) gamma^k.
std::array<UtilityEstimate, kNumAgents> estimate_utility(const StochasticGame& game,
                                                         const EpisodicProfile& profile, int s0,
                                                         std::uint64_t horizon,
                                                         std::uint64_t replications,
                                                         std::uint64_t seed);

}  // namespace episodic
