#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "episodic/exact_solvers.hpp"
#include "episodic/game_model.hpp"
#include "episodic/random.hpp"

namespace episodic {

// Per-agent learning parameters. The reference step size at the c-th visit of
// an extended state (c counting earlier visits) is alpha0 / (c+1)^rho; rho in
// (0.5, 1] makes it square-summable but not summable.
struct LearningConfig {
  double tau = 0.05;
  double rho = 0.7;
  double alpha0 = 1.0;
  double q_init = 0.0;

  // Throws std::invalid_argument on out-of-domain parameters.
  void validate() const;
};

double reference_step_size(const LearningConfig& config, std::uint64_t prior_visits);

// min{1, alpha_c / br(a)}: the 1/br factor equalizes the expected update rate
// across actions and the cap keeps iterates bounded.
double normalized_step_size(double alpha_c, double br_prob);

// Episodic individual Q-learning for one agent. Sees only the extended state
// sequence, its own actions and its own rewards.
//
// Per stage k the caller must invoke, in order:
//   begin_stage(x_k)   applies the deferred update of (x_{k-1}, a_{k-1}) with
//                      target r_{k-1} + gamma v(x_k), or r_{k-1} when x_{k-1}
//                      was in the last substage;
//   act(rng)           samples a_k from br(q(x_k, .));
//   update_value()     v(x_k) <- <br, q(x_k, .)>;
//   end_stage(r_k)     records the reward and counts the visit.
// Out-of-order calls throw std::logic_error.
class EpisodicQLearner {
 public:
  EpisodicQLearner(int num_states, int episode_length, int num_actions, double gamma,
                   LearningConfig config);

  void begin_stage(ExtendedState x);
  int act(Rng& rng);
  void update_value();
  void end_stage(double reward);

  // Step size the pending update applies to (x, a): nonzero only for the
  // extended state and action played in the last completed stage.
  double step_size(ExtendedState x, int action) const;

  const ExtendedSpace& space() const { return space_; }
  int num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }
  const LearningConfig& config() const { return config_; }
  std::uint64_t stage() const { return stage_; }

  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::VectorXd& v() const { return v_; }
  const std::vector<std::uint64_t>& visits() const { return visits_; }
  const Eigen::VectorXd& current_response() const { return response_; }

  // pi(s,m) = br(q(s,m,.)) for every extended state.
  EpisodicStrategy induced_strategy() const;

 private:
  enum class Phase { kBegin, kAct, kValue, kEnd };
  struct Pending {
    int flat = 0;
    int action = 0;
    double step = 0.0;
    double reward = 0.0;
    bool last_substage = false;
  };

  void expect(Phase phase, const char* call) const;

  ExtendedSpace space_;
  int num_actions_;
  double gamma_;
  LearningConfig config_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd v_;
  std::vector<std::uint64_t> visits_;

  Phase phase_ = Phase::kBegin;
  std::uint64_t stage_ = 0;
  ExtendedState current_;
  int action_ = 0;
  Eigen::VectorXd response_;
  std::optional<Pending> pending_;
};

// Payoff of both agents at stage k given Nature's draw and the joint action.
using PayoffSequence =
    std::function<std::array<double, kNumAgents>(std::uint64_t k, int omega, int a1, int a2)>;

struct QTrajectory {
  std::vector<std::uint64_t> stages;
  std::vector<std::array<Eigen::VectorXd, kNumAgents>> q;
  std::array<Eigen::VectorXd, kNumAgents> final_q;
};

// Individual Q-learning in a sequence of one-shot games with Nature:
// q(a) <- q(a) + min{1, alpha_k / br(a)} (u_k(omega_k, a1, a2) - q(a)) for the
// played action only. This is the single-state, M = 1 case of
// EpisodicQLearner and uses the same random streams as run_learning, so for
// a constant payoff sequence both produce the same iterates.
QTrajectory run_individual_q_sequence(const PayoffSequence& payoffs,
                                      std::span<const double> nature,
                                      std::array<int, kNumAgents> num_actions,
                                      const std::array<LearningConfig, kNumAgents>& configs,
                                      std::uint64_t stages, std::uint64_t seed,
                                      std::uint64_t record_every = 0);

}  // namespace episodic
