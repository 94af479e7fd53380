#include "episodic/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "episodic/graph_analysis.hpp"

namespace episodic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Environment::Environment(const StochasticGame& game, int episode_length, int initial_state, Rng rng)
    : game_(&game), episode_length_(episode_length), state_(initial_state), rng_(std::move(rng)) {
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  if (initial_state < 0 || initial_state >= game.num_states())
    throw std::out_of_range("initial state out of range");
}

void Environment::reset(int state) {
  if (state < 0 || state >= game_->num_states()) throw std::out_of_range("state out of range");
  state_ = state;
  substage_ = 0;
  stage_ = 0;
}

Environment::Step Environment::step(int a1, int a2) {
  if (a1 < 0 || a1 >= game_->num_actions(0) || a2 < 0 || a2 >= game_->num_actions(1))
    throw std::out_of_range("action out of range");
  Step out;
  for (int i = 0; i < kNumAgents; ++i) out.rewards[i] = game_->reward(i, state_, a1, a2);
  out.next_state = sample_index(game_->transition_row(state_, a1, a2), rng_);
  state_ = out.next_state;
  ++stage_;
  substage_ = static_cast<int>(stage_ % static_cast<std::uint64_t>(episode_length_));
  return out;
}

std::string metrics_to_csv(const RunMetrics& metrics) {
  std::ostringstream os;
  os << kMetricsHeader << "\n" << std::setprecision(17);
  auto field = [&](double x) {
    if (!std::isnan(x)) os << x;
  };
  for (const MetricsRow& r : metrics.rows) {
    os << r.stage << "," << r.agent + 1 << ",";
    field(r.sup_q_err);
    os << ",";
    field(r.sup_v_err);
    os << ",";
    field(r.exploit_bound);
    os << ",";
    field(r.exploit_exact);
    os << "," << r.visits_min << "," << r.visits_max << "\n";
  }
  return os.str();
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) header.push_back(col);
  }
  const std::vector<std::string> required = {"stage",        "agent",         "sup_q_err",
                                             "sup_v_err",    "exploit_bound", "exploit_exact",
                                             "visits_min",   "visits_max"};
  std::vector<int> where(required.size(), -1);
  for (std::size_t k = 0; k < required.size(); ++k) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == required[k]) where[k] = static_cast<int>(c);
    if (where[k] < 0) throw std::runtime_error("metrics CSV lacks column '" + required[k] + "'");
  }

  auto number = [](const std::string& s) {
    if (s.empty()) return kNaN;
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("malformed number '" + s + "'");
    return x;
  };

  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != header.size()) throw std::runtime_error("metrics CSV row has wrong width");
    try {
      MetricsRow r;
      r.stage = std::stoull(cells[where[0]]);
      r.agent = std::stoi(cells[where[1]]) - 1;
      r.sup_q_err = number(cells[where[2]]);
      r.sup_v_err = number(cells[where[3]]);
      r.exploit_bound = number(cells[where[4]]);
      r.exploit_exact = number(cells[where[5]]);
      r.visits_min = std::stoull(cells[where[6]]);
      r.visits_max = std::stoull(cells[where[7]]);
      if (r.agent < 0 || r.agent >= kNumAgents) throw std::runtime_error("agent out of range");
      rows.push_back(r);
    } catch (const std::logic_error& e) {
      throw std::runtime_error(std::string("malformed metrics row: ") + e.what());
    }
  }
  return rows;
}

SolutionTables tables_from_learners(const std::array<EpisodicQLearner, kNumAgents>& agents) {
  SolutionTables t;
  t.num_states = agents[0].space().num_states();
  t.episode_length = agents[0].space().episode_length();
  for (int i = 0; i < kNumAgents; ++i) {
    t.q[i] = agents[i].q();
    t.v[i] = agents[i].v();
    t.profile[i] = agents[i].induced_strategy();
  }
  t.method = SolveMethod::kLearned;
  if (agents[0].config().tau == agents[1].config().tau) t.tau = agents[0].config().tau;
  return t;
}

LearningRun run_learning(const StochasticGame& game,
                         const std::array<LearningConfig, kNumAgents>& configs,
                         const RunOptions& options, const std::optional<SolutionTables>& oracle) {
  const auto started = std::chrono::steady_clock::now();
  const int M = options.episode_length;
  if (oracle && (oracle->num_states != game.num_states() || oracle->episode_length != M))
    throw std::invalid_argument("oracle tables do not match the game and episode length");

  LearningRun run{{EpisodicQLearner(game.num_states(), M, game.num_actions(0), game.gamma(0), configs[0]),
                   EpisodicQLearner(game.num_states(), M, game.num_actions(1), game.gamma(1), configs[1])},
                  {},
                  {}};
  auto& agents = run.agents;
  RunMetrics& metrics = run.metrics;
  if (!extended_strongly_connected(game, M))
    metrics.warnings.push_back(
        "extended state graph is not strongly connected; some stage games may never be visited");

  Environment env(game, M, options.initial_state, make_stream(options.seed, kEnvironmentStream));
  std::array<Rng, kNumAgents> agent_rng{make_stream(options.seed, agent_stream(0)),
                                        make_stream(options.seed, agent_stream(1))};

  auto snapshot = [&](std::uint64_t k, bool with_exploit) {
    const auto& visits = agents[0].visits();
    const auto [lo, hi] = std::minmax_element(visits.begin(), visits.end());
    EpisodicProfile profile;
    std::array<double, kNumAgents> d{kNaN, kNaN};
    if (with_exploit) {
      profile = {agents[0].induced_strategy(), agents[1].induced_strategy()};
      d = delta(game, profile);
    }
    for (int i = 0; i < kNumAgents; ++i) {
      MetricsRow r;
      r.stage = k;
      r.agent = i;
      r.visits_min = *lo;
      r.visits_max = *hi;
      r.sup_q_err = oracle ? (agents[i].q() - oracle->q[i]).lpNorm<Eigen::Infinity>() : kNaN;
      r.sup_v_err = oracle ? (agents[i].v() - oracle->v[i]).lpNorm<Eigen::Infinity>() : kNaN;
      r.exploit_bound = kNaN;
      r.exploit_exact = kNaN;
      if (with_exploit) {
        r.exploit_bound = epsilon_bound_learning(d[i], configs[i].tau, game.num_actions(i),
                                                 game.gamma(i), M);
        try {
          r.exploit_exact = infinite_exploitability(game, profile, i);
        } catch (const MultichainError& e) {
          metrics.warnings.push_back("stage " + std::to_string(k) + ", agent " +
                                     std::to_string(i + 1) + ": " + e.what());
        }
      }
      metrics.rows.push_back(r);
    }
  };

  for (std::uint64_t k = 0; k < options.stages; ++k) {
    const ExtendedState x = env.current();
    for (auto& a : agents) a.begin_stage(x);
    if (k > 0 && options.snapshot_every && k % options.snapshot_every == 0)
      snapshot(k, options.exploit_every && k % options.exploit_every == 0);
    const int a1 = agents[0].act(agent_rng[0]);
    const int a2 = agents[1].act(agent_rng[1]);
    const Environment::Step step = env.step(a1, a2);
    for (int i = 0; i < kNumAgents; ++i) {
      agents[i].update_value();
      agents[i].end_stage(step.rewards[i]);
    }
  }
  // Apply the last deferred update using the final observed state.
  for (auto& a : agents) a.begin_stage(env.current());
  snapshot(options.stages, true);

  metrics.visits = agents[0].visits();
  run.induced = {agents[0].induced_strategy(), agents[1].induced_strategy()};
  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

std::array<UtilityEstimate, kNumAgents> estimate_utility(const StochasticGame& game,
                                                         const EpisodicProfile& profile, int s0,
                                                         std::uint64_t horizon,
                                                         std::uint64_t replications,
                                                         std::uint64_t seed) {
  check_profile(game, profile);
  if (horizon < 1 || replications < 1)
    throw std::invalid_argument("horizon and replications must be positive");
  const int M = profile[0].episode_length();
  Environment env(game, M, s0, make_stream(seed, kEnvironmentStream));
  std::array<Rng, kNumAgents> agent_rng{make_stream(seed, agent_stream(0)),
                                        make_stream(seed, agent_stream(1))};
  std::array<double, kNumAgents> sum{}, sum_sq{};
  for (std::uint64_t rep = 0; rep < replications; ++rep) {
    env.reset(s0);
    std::array<double, kNumAgents> total{}, weight{1.0, 1.0};
    for (std::uint64_t k = 0; k < horizon; ++k) {
      const ExtendedState x = env.current();
      const int a1 = sample_index(profile[0].at(x.state, x.substage), agent_rng[0]);
      const int a2 = sample_index(profile[1].at(x.state, x.substage), agent_rng[1]);
      const Environment::Step step = env.step(a1, a2);
      for (int i = 0; i < kNumAgents; ++i) {
        total[i] += weight[i] * step.rewards[i];
        weight[i] *= game.gamma(i);
      }
    }
    for (int i = 0; i < kNumAgents; ++i) {
      const double gamma = game.gamma(i);
      const double u = gamma == 1.0 ? total[i] / static_cast<double>(horizon) : (1.0 - gamma) * total[i];
      sum[i] += u;
      sum_sq[i] += u * u;
    }
  }
  std::array<UtilityEstimate, kNumAgents> out;
  const double n = static_cast<double>(replications);
  for (int i = 0; i < kNumAgents; ++i) {
    out[i].mean = sum[i] / n;
    const double var = replications > 1 ? std::max(0.0, (sum_sq[i] - n * out[i].mean * out[i].mean) / (n - 1.0)) : 0.0;
    out[i].std_error = std::sqrt(var / n);
  }
  return out;
}

}  // namespace episodic
