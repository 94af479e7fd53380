#include "episodic/learning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "episodic/stage_games.hpp"

namespace episodic {

void LearningConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(rho > 0.5 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0.5, 1]");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("alpha0 must lie in (0, 1]");
  if (!std::isfinite(q_init)) throw std::invalid_argument("initial q must be finite");
}

double reference_step_size(const LearningConfig& config, std::uint64_t prior_visits) {
  return config.alpha0 / std::pow(static_cast<double>(prior_visits) + 1.0, config.rho);
}

double normalized_step_size(double alpha_c, double br_prob) {
  if (!(br_prob > 0.0)) throw std::invalid_argument("played action must have positive probability");
  return std::min(1.0, alpha_c / br_prob);
}

EpisodicQLearner::EpisodicQLearner(int num_states, int episode_length, int num_actions,
                                   double gamma, LearningConfig config)
    : space_(num_states, episode_length),
      num_actions_(num_actions),
      gamma_(gamma),
      config_(config) {
  config_.validate();
  if (num_actions < 1) throw std::invalid_argument("agent needs at least one action");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  q_ = Eigen::MatrixXd::Constant(space_.size(), num_actions, config_.q_init);
  v_ = Eigen::VectorXd::Constant(space_.size(), config_.q_init);
  visits_.assign(space_.size(), 0);
  response_ = Eigen::VectorXd::Constant(num_actions, 1.0 / num_actions);
}

void EpisodicQLearner::expect(Phase phase, const char* call) const {
  if (phase_ != phase)
    throw std::logic_error(std::string("EpisodicQLearner::") + call + " called out of order");
}

void EpisodicQLearner::begin_stage(ExtendedState x) {
  expect(Phase::kBegin, "begin_stage");
  if (x.state < 0 || x.state >= space_.num_states() || x.substage < 0 ||
      x.substage >= space_.episode_length())
    throw std::out_of_range("extended state out of range");
  if (pending_) {
    const Pending& p = *pending_;
    const double target =
        p.last_substage ? p.reward : p.reward + gamma_ * v_(space_.flat(x));
    double& entry = q_(p.flat, p.action);
    entry += p.step * (target - entry);
    pending_.reset();
  }
  current_ = x;
  phase_ = Phase::kAct;
}

int EpisodicQLearner::act(Rng& rng) {
  expect(Phase::kAct, "act");
  const int flat = space_.flat(current_);
  smoothed_best_response_into(q_.row(flat).transpose(), config_.tau, response_);
  action_ = sample_index(response_, rng);
  phase_ = Phase::kValue;
  return action_;
}

void EpisodicQLearner::update_value() {
  expect(Phase::kValue, "update_value");
  const int flat = space_.flat(current_);
  v_(flat) = q_.row(flat).dot(response_.transpose());
  phase_ = Phase::kEnd;
}

void EpisodicQLearner::end_stage(double reward) {
  expect(Phase::kEnd, "end_stage");
  const int flat = space_.flat(current_);
  Pending p;
  p.flat = flat;
  p.action = action_;
  p.step = normalized_step_size(reference_step_size(config_, visits_[flat]), response_(action_));
  p.reward = reward;
  p.last_substage = space_.is_last_substage(current_.substage);
  pending_ = p;
  ++visits_[flat];
  ++stage_;
  phase_ = Phase::kBegin;
}

double EpisodicQLearner::step_size(ExtendedState x, int action) const {
  if (!pending_) return 0.0;
  return pending_->flat == space_.flat(x) && pending_->action == action ? pending_->step : 0.0;
}

EpisodicStrategy EpisodicQLearner::induced_strategy() const {
  Eigen::MatrixXd probs(space_.size(), num_actions_);
  for (int x = 0; x < space_.size(); ++x)
    probs.row(x) = smoothed_best_response(q_.row(x).transpose(), config_.tau).transpose();
  return EpisodicStrategy(space_.num_states(), space_.episode_length(), std::move(probs));
}

QTrajectory run_individual_q_sequence(const PayoffSequence& payoffs,
                                      std::span<const double> nature,
                                      std::array<int, kNumAgents> num_actions,
                                      const std::array<LearningConfig, kNumAgents>& configs,
                                      std::uint64_t stages, std::uint64_t seed,
                                      std::uint64_t record_every) {
  if (nature.empty()) throw std::invalid_argument("Nature needs at least one outcome");
  std::array<EpisodicQLearner, kNumAgents> agents{
      EpisodicQLearner(1, 1, num_actions[0], 1.0, configs[0]),
      EpisodicQLearner(1, 1, num_actions[1], 1.0, configs[1])};
  Rng env_rng = make_stream(seed, kEnvironmentStream);
  std::array<Rng, kNumAgents> agent_rng{make_stream(seed, agent_stream(0)),
                                        make_stream(seed, agent_stream(1))};
  const ExtendedState only{0, 0};
  QTrajectory out;
  auto record = [&](std::uint64_t k) {
    out.stages.push_back(k);
    out.q.push_back({agents[0].q().row(0).transpose(), agents[1].q().row(0).transpose()});
  };

  for (std::uint64_t k = 0; k < stages; ++k) {
    for (auto& a : agents) a.begin_stage(only);
    if (record_every && k > 0 && k % record_every == 0) record(k);
    const int a1 = agents[0].act(agent_rng[0]);
    const int a2 = agents[1].act(agent_rng[1]);
    const int omega = sample_index(nature, env_rng);
    const auto u = payoffs(k, omega, a1, a2);
    for (int i = 0; i < kNumAgents; ++i) {
      agents[i].update_value();
      agents[i].end_stage(u[i]);
    }
  }
  for (auto& a : agents) a.begin_stage(only);
  if (record_every) record(stages);
  out.final_q = {agents[0].q().row(0).transpose(), agents[1].q().row(0).transpose()};
  return out;
}

}  // namespace episodic
