#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "episodic/game_model.hpp"
#include "episodic/stage_games.hpp"

namespace episodic {

// One agent's episodic strategy: row s*M+m holds the mixed action at (s,m).
class EpisodicStrategy {
 public:
  EpisodicStrategy() = default;
  // Throws std::invalid_argument unless every row is a distribution.
  EpisodicStrategy(int num_states, int episode_length, Eigen::MatrixXd probabilities);

  static EpisodicStrategy uniform(int num_states, int episode_length, int num_actions);

  int num_states() const { return num_states_; }
  int episode_length() const { return episode_length_; }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  ExtendedSpace space() const { return {num_states_, episode_length_}; }

  Eigen::VectorXd at(int s, int m) const { return probs_.row(s * episode_length_ + m).transpose(); }
  double prob(int s, int m, int a) const { return probs_(s * episode_length_ + m, a); }
  const Eigen::MatrixXd& table() const { return probs_; }

 private:
  int num_states_ = 0;
  int episode_length_ = 1;
  Eigen::MatrixXd probs_;
};

using EpisodicProfile = std::array<EpisodicStrategy, kNumAgents>;

// Checks that a profile fits the game (state count, action counts, common M).
void check_profile(const StochasticGame& game, const EpisodicProfile& profile);

enum class SolveMethod { kLogit, kMinimax, kArgmax, kLearned };
std::string to_string(SolveMethod method);
SolveMethod solve_method_from_string(const std::string& name);

// Per-agent q over (s,m) x own actions and v over (s,m).
//
// Boundary convention shared by every module: continuation from substage M-1
// across the episode boundary is zero. v(s,m) = <pi(s,m), q(s,m,.)> is stored
// for every m, including M-1; it is read as a continuation only from m-1.
struct SolutionTables {
  int num_states = 0;
  int episode_length = 1;
  std::array<Eigen::MatrixXd, kNumAgents> q;
  std::array<Eigen::VectorXd, kNumAgents> v;
  EpisodicProfile profile;
  SolveMethod method = SolveMethod::kLogit;
  std::optional<double> tau;
  double max_residual = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stage game at (s,m): Q^i(s,m,a) = r^i(s,a) + gamma^i sum_s' p(s'|s,a) v^i(s',m+1),
// with the continuation dropped at m = M-1.
MatrixGame stage_game(const StochasticGame& game, int episode_length, int s, int m,
                      const std::array<Eigen::VectorXd, kNumAgents>& v);

// Limit of the episodic learning dynamics: substage-descending sweep solving
// each stage game's logit fixed point. Throws SolverError naming (s,m) when a
// stage fixed point does not converge.
SolutionTables backward_induction_logit(const StochasticGame& game, int episode_length, double tau,
                                        const LogitOptions& options = {});

// Exact finite-horizon equilibrium for games whose stage rewards are zero-sum
// with a shared discount. Throws std::invalid_argument otherwise.
SolutionTables backward_induction_minimax(const StochasticGame& game, int episode_length);

// sup-norm violation of q^i(s,m,a) = Q^i(s,m,a,pi^j(s,m)) and
// v^i(s,m) = <pi^i(s,m), q^i(s,m,.)>, recomputed from the tables.
double consistency_residual(const StochasticGame& game, const SolutionTables& tables);

// Finite-horizon utility U_hat^i = E[sum_{k<M} gamma^k r^i] from start s0,
// by forward propagation of the state distribution.
std::array<double, kNumAgents> evaluate_finite(const StochasticGame& game,
                                               const EpisodicProfile& profile, int s0);

// max_s U_hat^i(s) - min_s U_hat^i(s) per agent.
std::array<double, kNumAgents> delta(const StochasticGame& game, const EpisodicProfile& profile);

struct BestResponseResult {
  Eigen::VectorXd value;      // best-response value over (s,m), flat s*M+m
  Eigen::VectorXd gap;        // per start state: BR value(s,0) - U_hat^i(profile; s), >= 0
  double eps_hat = 0.0;       // max over start states
  std::vector<int> policy;    // best pure action per (s,m); ties to lowest index
};

// Exact finite-horizon best response of `agent` against the other agent's
// strategy in `profile`, by backward induction with a hard max.
BestResponseResult finite_best_response(const StochasticGame& game, const EpisodicProfile& profile,
                                        int agent);

// Approximation error for an episodic profile that is an eps_hat-equilibrium
// of the M-stage game with start-state spread delta.
double epsilon_bound(double delta, double eps_hat, double gamma, int episode_length);
// Same bound with eps_hat = tau log|A| * sum_{k<M} gamma^k, the guarantee for
// the logit profile.
double epsilon_bound_learning(double delta, double tau, int num_actions, double gamma,
                              int episode_length);

// Thrown by time-averaged evaluation when the long-run average would depend
// on which recurrent class the chain enters.
class MultichainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Infinite-horizon normalized utility of `agent` from (s0, 0): (1-gamma)-scaled
// discounted value, or the long-run average reward when gamma = 1.
double evaluate_infinite(const StochasticGame& game, const EpisodicProfile& profile, int s0,
                         int agent);

// max over start states of (best response value - evaluate_infinite), where
// the best response is over all strategies of `agent` against the episodic
// opponent. Solved as a stationary MDP on S x {0..M-1}: value iteration for
// gamma < 1, relative value iteration for gamma = 1 (requires the MDP to be
// communicating, else MultichainError).
double infinite_exploitability(const StochasticGame& game, const EpisodicProfile& profile,
                               int agent);

struct BoundReport {
  int episode_length = 1;
  std::array<double, kNumAgents> gamma{};
  std::array<double, kNumAgents> delta{};
  std::array<double, kNumAgents> eps_hat{};
  std::optional<double> tau;
  std::array<double, kNumAgents> xi{};             // tau log|A^i|, 0 without tau
  std::array<double, kNumAgents> epsilon{};         // bound from measured eps_hat
  std::array<std::optional<double>, kNumAgents> epsilon_learning;  // logit bound when tau given
  std::array<double, kNumAgents> exploit_finite{};
  std::array<std::optional<double>, kNumAgents> exploit_infinite;
  std::array<std::string, kNumAgents> notes;
};

BoundReport bound_report(const StochasticGame& game, const EpisodicProfile& profile,
                         std::optional<double> tau);

}  // namespace episodic
