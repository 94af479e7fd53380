#include "episodic/exact_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "episodic/graph_analysis.hpp"

namespace episodic {

namespace {

constexpr double kDistributionTolerance = 1e-9;

int other(int agent) { return 1 - agent; }

// Reward and state-transition kernels on S x {0..M-1} induced by a profile.
struct InducedChain {
  Eigen::MatrixXd transition;                      // |S̄| x |S̄|
  std::array<Eigen::VectorXd, kNumAgents> reward;  // |S̄|
};

InducedChain induced_chain(const StochasticGame& game, const EpisodicProfile& profile) {
  const ExtendedSpace space = profile[0].space();
  const int ns = game.num_states();
  InducedChain out;
  out.transition = Eigen::MatrixXd::Zero(space.size(), space.size());
  for (int i = 0; i < kNumAgents; ++i) out.reward[i] = Eigen::VectorXd::Zero(space.size());
  for (int s = 0; s < ns; ++s)
    for (int m = 0; m < space.episode_length(); ++m) {
      const int x = space.flat(s, m);
      const int next_m = space.next_substage(m);
      for (int a1 = 0; a1 < game.num_actions(0); ++a1)
        for (int a2 = 0; a2 < game.num_actions(1); ++a2) {
          const double w = profile[0].prob(s, m, a1) * profile[1].prob(s, m, a2);
          if (w == 0.0) continue;
          for (int i = 0; i < kNumAgents; ++i) out.reward[i](x) += w * game.reward(i, s, a1, a2);
          for (int t = 0; t < ns; ++t)
            out.transition(x, space.flat(t, next_m)) += w * game.transition(s, a1, a2, t);
        }
    }
  return out;
}

// Single-agent MDP on S x {0..M-1} faced by `agent` when the other agent plays
// its episodic strategy. reward(x, a), transition[a](x, x').
struct ResponseMdp {
  Eigen::MatrixXd reward;
  std::vector<Eigen::MatrixXd> transition;
};

ResponseMdp response_mdp(const StochasticGame& game, const EpisodicProfile& profile, int agent) {
  const ExtendedSpace space = profile[0].space();
  const int ns = game.num_states();
  const int own = game.num_actions(agent);
  const int opp = game.num_actions(other(agent));
  const EpisodicStrategy& opponent = profile[other(agent)];
  ResponseMdp mdp;
  mdp.reward = Eigen::MatrixXd::Zero(space.size(), own);
  mdp.transition.assign(own, Eigen::MatrixXd::Zero(space.size(), space.size()));
  for (int s = 0; s < ns; ++s)
    for (int m = 0; m < space.episode_length(); ++m) {
      const int x = space.flat(s, m);
      const int next_m = space.next_substage(m);
      for (int a = 0; a < own; ++a)
        for (int b = 0; b < opp; ++b) {
          const double w = opponent.prob(s, m, b);
          if (w == 0.0) continue;
          const int a1 = agent == 0 ? a : b;
          const int a2 = agent == 0 ? b : a;
          mdp.reward(x, a) += w * game.reward(agent, s, a1, a2);
          for (int t = 0; t < ns; ++t)
            mdp.transition[a](x, space.flat(t, next_m)) += w * game.transition(s, a1, a2, t);
        }
    }
  return mdp;
}

DirectedGraph support_graph(const Eigen::MatrixXd& p) {
  std::vector<std::vector<int>> adj(p.rows());
  for (int x = 0; x < p.rows(); ++x)
    for (int y = 0; y < p.cols(); ++y)
      if (p(x, y) > 0.0) adj[x].push_back(y);
  return DirectedGraph(std::move(adj));
}

std::string describe_extended(const ExtendedSpace& space, const std::vector<int>& members) {
  std::ostringstream os;
  os << "{";
  for (std::size_t k = 0; k < members.size(); ++k) {
    const ExtendedState x = space.at(members[k]);
    os << (k ? "," : "") << "(" << x.state << "," << x.substage << ")";
  }
  os << "}";
  return os.str();
}

}  // namespace

EpisodicStrategy::EpisodicStrategy(int num_states, int episode_length,
                                   Eigen::MatrixXd probabilities)
    : num_states_(num_states), episode_length_(episode_length), probs_(std::move(probabilities)) {
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  if (probs_.rows() != static_cast<Eigen::Index>(num_states) * episode_length || probs_.cols() < 1)
    throw std::invalid_argument("episodic strategy table has wrong shape");
  for (int x = 0; x < probs_.rows(); ++x) {
    if ((probs_.row(x).array() < 0.0).any() || !probs_.row(x).allFinite() ||
        std::abs(probs_.row(x).sum() - 1.0) > kDistributionTolerance)
      throw std::invalid_argument("episodic strategy row " + std::to_string(x) +
                                  " is not a probability distribution");
  }
}

EpisodicStrategy EpisodicStrategy::uniform(int num_states, int episode_length, int num_actions) {
  return EpisodicStrategy(
      num_states, episode_length,
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(num_states) * episode_length, num_actions,
                                1.0 / num_actions));
}

void check_profile(const StochasticGame& game, const EpisodicProfile& profile) {
  for (int i = 0; i < kNumAgents; ++i) {
    if (profile[i].num_states() != game.num_states())
      throw std::invalid_argument("profile state count does not match the game");
    if (profile[i].num_actions() != game.num_actions(i))
      throw std::invalid_argument("profile action count does not match agent " +
                                  std::to_string(i + 1));
  }
  if (profile[0].episode_length() != profile[1].episode_length())
    throw std::invalid_argument("agents' strategies use different episode lengths");
}

std::string to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::kLogit: return "logit";
    case SolveMethod::kMinimax: return "minimax";
    case SolveMethod::kArgmax: return "argmax";
    case SolveMethod::kLearned: return "learned";
  }
  return "logit";
}

SolveMethod solve_method_from_string(const std::string& name) {
  if (name == "logit") return SolveMethod::kLogit;
  if (name == "minimax") return SolveMethod::kMinimax;
  if (name == "argmax") return SolveMethod::kArgmax;
  if (name == "learned") return SolveMethod::kLearned;
  throw std::invalid_argument("unknown solve method '" + name + "'");
}

MatrixGame stage_game(const StochasticGame& game, int episode_length, int s, int m,
                      const std::array<Eigen::VectorXd, kNumAgents>& v) {
  const ExtendedSpace space(game.num_states(), episode_length);
  MatrixGame g{game.reward_matrix(0, s), game.reward_matrix(1, s)};
  if (space.is_last_substage(m)) return g;
  for (int a1 = 0; a1 < g.rows(); ++a1)
    for (int a2 = 0; a2 < g.cols(); ++a2) {
      double c1 = 0.0, c2 = 0.0;
      for (int t = 0; t < game.num_states(); ++t) {
        const double p = game.transition(s, a1, a2, t);
        c1 += p * v[0](space.flat(t, m + 1));
        c2 += p * v[1](space.flat(t, m + 1));
      }
      g.u1(a1, a2) += game.gamma(0) * c1;
      g.u2(a1, a2) += game.gamma(1) * c2;
    }
  return g;
}

namespace {

SolutionTables empty_tables(const StochasticGame& game, int episode_length) {
  const ExtendedSpace space(game.num_states(), episode_length);
  SolutionTables t;
  t.num_states = game.num_states();
  t.episode_length = episode_length;
  for (int i = 0; i < kNumAgents; ++i) {
    t.q[i] = Eigen::MatrixXd::Zero(space.size(), game.num_actions(i));
    t.v[i] = Eigen::VectorXd::Zero(space.size());
  }
  return t;
}

}  // namespace

SolutionTables backward_induction_logit(const StochasticGame& game, int episode_length, double tau,
                                        const LogitOptions& options) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  SolutionTables t = empty_tables(game, episode_length);
  const ExtendedSpace space(game.num_states(), episode_length);
  std::array<Eigen::MatrixXd, kNumAgents> probs{t.q[0], t.q[1]};
  for (int m = episode_length - 1; m >= 0; --m) {
    for (int s = 0; s < game.num_states(); ++s) {
      const int x = space.flat(s, m);
      const MatrixGame g = stage_game(game, episode_length, s, m, t.v);
      LogitFixedPoint fp;
      try {
        fp = logit_fixed_point(g, tau, options);
      } catch (const LogitNonConvergence& e) {
        throw SolverError("stage game at (s=" + std::to_string(s) + ",m=" + std::to_string(m) +
                          "): " + e.what());
      }
      for (int i = 0; i < kNumAgents; ++i) {
        const Eigen::VectorXd pi = smoothed_best_response(fp.q[i], tau);
        t.q[i].row(x) = fp.q[i].transpose();
        t.v[i](x) = pi.dot(fp.q[i]);
        probs[i].row(x) = pi.transpose();
      }
    }
  }
  for (int i = 0; i < kNumAgents; ++i)
    t.profile[i] = EpisodicStrategy(game.num_states(), episode_length, probs[i]);
  t.method = SolveMethod::kLogit;
  t.tau = tau;
  t.max_residual = consistency_residual(game, t);
  return t;
}

SolutionTables backward_induction_minimax(const StochasticGame& game, int episode_length) {
  if (game.gamma(0) != game.gamma(1))
    throw std::invalid_argument("minimax backward induction needs a shared discount factor");
  for (int s = 0; s < game.num_states(); ++s)
    if (!is_zero_sum({game.reward_matrix(0, s), game.reward_matrix(1, s)}))
      throw std::invalid_argument("minimax backward induction needs zero-sum rewards; state " +
                                  std::to_string(s) + " is not");
  SolutionTables t = empty_tables(game, episode_length);
  const ExtendedSpace space(game.num_states(), episode_length);
  std::array<Eigen::MatrixXd, kNumAgents> probs{t.q[0], t.q[1]};
  for (int m = episode_length - 1; m >= 0; --m) {
    for (int s = 0; s < game.num_states(); ++s) {
      const int x = space.flat(s, m);
      const MatrixGame g = stage_game(game, episode_length, s, m, t.v);
      const ZeroSumSolution sol = solve_matrix_game(g.u1);
      t.q[0].row(x) = row_payoffs(g, sol.profile[1]).transpose();
      t.q[1].row(x) = col_payoffs(g, sol.profile[0]).transpose();
      for (int i = 0; i < kNumAgents; ++i) {
        t.v[i](x) = sol.profile[i].dot(t.q[i].row(x).transpose());
        probs[i].row(x) = sol.profile[i].transpose();
      }
    }
  }
  for (int i = 0; i < kNumAgents; ++i)
    t.profile[i] = EpisodicStrategy(game.num_states(), episode_length, probs[i]);
  t.method = SolveMethod::kMinimax;
  t.max_residual = consistency_residual(game, t);
  return t;
}

double consistency_residual(const StochasticGame& game, const SolutionTables& tables) {
  const ExtendedSpace space(tables.num_states, tables.episode_length);
  double worst = 0.0;
  for (int s = 0; s < tables.num_states; ++s)
    for (int m = 0; m < tables.episode_length; ++m) {
      const int x = space.flat(s, m);
      const MatrixGame g = stage_game(game, tables.episode_length, s, m, tables.v);
      const Eigen::VectorXd pi1 = tables.profile[0].at(s, m);
      const Eigen::VectorXd pi2 = tables.profile[1].at(s, m);
      const std::array<Eigen::VectorXd, kNumAgents> expected{row_payoffs(g, pi2), col_payoffs(g, pi1)};
      const std::array<Eigen::VectorXd, kNumAgents> own{pi1, pi2};
      for (int i = 0; i < kNumAgents; ++i) {
        const Eigen::VectorXd q = tables.q[i].row(x).transpose();
        worst = std::max(worst, (q - expected[i]).lpNorm<Eigen::Infinity>());
        worst = std::max(worst, std::abs(tables.v[i](x) - own[i].dot(q)));
        if (tables.method == SolveMethod::kLogit && tables.tau)
          worst = std::max(worst,
                           (own[i] - smoothed_best_response(q, *tables.tau)).lpNorm<Eigen::Infinity>());
      }
    }
  return worst;
}

std::array<double, kNumAgents> evaluate_finite(const StochasticGame& game,
                                               const EpisodicProfile& profile, int s0) {
  check_profile(game, profile);
  const int ns = game.num_states();
  const int M = profile[0].episode_length();
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(ns);
  dist(s0) = 1.0;
  std::array<double, kNumAgents> total{0.0, 0.0};
  std::array<double, kNumAgents> discount{1.0, 1.0};
  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) {
      if (dist(s) == 0.0) continue;
      for (int a1 = 0; a1 < game.num_actions(0); ++a1)
        for (int a2 = 0; a2 < game.num_actions(1); ++a2) {
          const double w = dist(s) * profile[0].prob(s, m, a1) * profile[1].prob(s, m, a2);
          if (w == 0.0) continue;
          for (int i = 0; i < kNumAgents; ++i)
            total[i] += discount[i] * w * game.reward(i, s, a1, a2);
          for (int t = 0; t < ns; ++t) next(t) += w * game.transition(s, a1, a2, t);
        }
    }
    dist = next;
    for (int i = 0; i < kNumAgents; ++i) discount[i] *= game.gamma(i);
  }
  return total;
}

std::array<double, kNumAgents> delta(const StochasticGame& game, const EpisodicProfile& profile) {
  std::array<double, kNumAgents> lo{}, hi{};
  for (int s = 0; s < game.num_states(); ++s) {
    const auto u = evaluate_finite(game, profile, s);
    for (int i = 0; i < kNumAgents; ++i) {
      lo[i] = s == 0 ? u[i] : std::min(lo[i], u[i]);
      hi[i] = s == 0 ? u[i] : std::max(hi[i], u[i]);
    }
  }
  return {hi[0] - lo[0], hi[1] - lo[1]};
}

BestResponseResult finite_best_response(const StochasticGame& game, const EpisodicProfile& profile,
                                        int agent) {
  check_profile(game, profile);
  const int ns = game.num_states();
  const int M = profile[0].episode_length();
  const ExtendedSpace space(ns, M);
  const ResponseMdp mdp = response_mdp(game, profile, agent);
  const double gamma = game.gamma(agent);

  BestResponseResult out;
  out.value = Eigen::VectorXd::Zero(space.size());
  out.policy.assign(space.size(), 0);
  for (int m = M - 1; m >= 0; --m)
    for (int s = 0; s < ns; ++s) {
      const int x = space.flat(s, m);
      double best = 0.0;
      int best_a = -1;
      for (int a = 0; a < game.num_actions(agent); ++a) {
        double val = mdp.reward(x, a);
        if (!space.is_last_substage(m)) val += gamma * mdp.transition[a].row(x).dot(out.value);
        if (best_a < 0 || val > best) {
          best = val;
          best_a = a;
        }
      }
      out.value(x) = best;
      out.policy[x] = best_a;
    }

  out.gap = Eigen::VectorXd::Zero(ns);
  for (int s = 0; s < ns; ++s) {
    // Nonnegative in exact arithmetic; clamp roundoff.
    out.gap(s) = std::max(0.0, out.value(space.flat(s, 0)) - evaluate_finite(game, profile, s)[agent]);
    out.eps_hat = s == 0 ? out.gap(s) : std::max(out.eps_hat, out.gap(s));
  }
  return out;
}

double epsilon_bound(double delta, double eps_hat, double gamma, int episode_length) {
  if (!(delta >= 0.0) || !(eps_hat >= 0.0))
    throw std::invalid_argument("delta and eps_hat must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  if (gamma == 1.0) return (delta + eps_hat) / episode_length;
  const double gm = std::pow(gamma, episode_length);
  return (gm * delta + eps_hat) * (1.0 - gamma) / (1.0 - gm);
}

double epsilon_bound_learning(double delta, double tau, int num_actions, double gamma,
                              int episode_length) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (num_actions < 1) throw std::invalid_argument("action count must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  const double xi = tau * std::log(static_cast<double>(num_actions));
  double horizon_weight = 0.0;
  double g = 1.0;
  for (int k = 0; k < episode_length; ++k, g *= gamma) horizon_weight += g;
  return epsilon_bound(delta, xi * horizon_weight, gamma, episode_length);
}

namespace {

// Long-run average reward of the chain started at x0; the start must reach a
// single closed class.
double average_reward(const Eigen::MatrixXd& p, const Eigen::VectorXd& r, int x0,
                      const ExtendedSpace& space) {
  const DirectedGraph g = support_graph(p);
  int count = 0;
  const std::vector<int> comp = strongly_connected_components(g, &count);
  std::vector<bool> closed(count, true);
  for (int x = 0; x < g.size(); ++x)
    for (int y : g.successors(x))
      if (comp[y] != comp[x]) closed[comp[x]] = false;

  std::vector<bool> reached(g.size(), false);
  std::vector<int> frontier{x0};
  reached[x0] = true;
  while (!frontier.empty()) {
    const int x = frontier.back();
    frontier.pop_back();
    for (int y : g.successors(x))
      if (!reached[y]) {
        reached[y] = true;
        frontier.push_back(y);
      }
  }
  std::vector<int> classes;
  for (int x = 0; x < g.size(); ++x)
    if (reached[x] && closed[comp[x]] &&
        std::find(classes.begin(), classes.end(), comp[x]) == classes.end())
      classes.push_back(comp[x]);

  if (classes.size() != 1) {
    std::ostringstream os;
    os << "time-averaged evaluation is multichain from (" << space.at(x0).state
       << ",0): recurrent classes";
    for (int c : classes) {
      std::vector<int> members;
      for (int x = 0; x < g.size(); ++x)
        if (comp[x] == c) members.push_back(x);
      os << " " << describe_extended(space, members);
    }
    throw MultichainError(os.str());
  }

  std::vector<int> members;
  for (int x = 0; x < g.size(); ++x)
    if (comp[x] == classes[0]) members.push_back(x);
  const int k = static_cast<int>(members.size());
  // Stationary distribution of the class: pi (P_C - I) = 0, sum pi = 1.
  Eigen::MatrixXd a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(j, i) = p(members[i], members[j]) - (i == j ? 1.0 : 0.0);
  a.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  double avg = 0.0;
  for (int i = 0; i < k; ++i) avg += pi(i) * r(members[i]);
  return avg;
}

}  // namespace

double evaluate_infinite(const StochasticGame& game, const EpisodicProfile& profile, int s0,
                         int agent) {
  check_profile(game, profile);
  const ExtendedSpace space = profile[0].space();
  const InducedChain chain = induced_chain(game, profile);
  const double gamma = game.gamma(agent);
  const int x0 = space.flat(s0, 0);
  if (gamma < 1.0) {
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(space.size(), space.size()) - gamma * chain.transition;
    const Eigen::VectorXd w = a.partialPivLu().solve(chain.reward[agent]);
    return (1.0 - gamma) * w(x0);
  }
  return average_reward(chain.transition, chain.reward[agent], x0, space);
}

double infinite_exploitability(const StochasticGame& game, const EpisodicProfile& profile,
                               int agent) {
  check_profile(game, profile);
  const ExtendedSpace space = profile[0].space();
  const ResponseMdp mdp = response_mdp(game, profile, agent);
  const int n = space.size();
  const int own = game.num_actions(agent);
  const double gamma = game.gamma(agent);

  auto bellman = [&](const Eigen::VectorXd& w, double scale, double cont) {
    Eigen::VectorXd out(n);
    for (int x = 0; x < n; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < own; ++a)
        best = std::max(best, scale * mdp.reward(x, a) + cont * mdp.transition[a].row(x).dot(w));
      out(x) = best;
    }
    return out;
  };

  std::vector<double> best_response(game.num_states());
  if (gamma < 1.0) {
    const double stop = 1e-10 * (1.0 - gamma) / (2.0 * gamma);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (long it = 0;; ++it) {
      const Eigen::VectorXd next = bellman(w, 1.0 - gamma, gamma);
      const double diff = (next - w).lpNorm<Eigen::Infinity>();
      w = next;
      if (diff <= stop) break;
      if (it > 10'000'000) throw SolverError("value iteration did not converge");
    }
    for (int s = 0; s < game.num_states(); ++s) best_response[s] = w(space.flat(s, 0));
  } else {
    Eigen::MatrixXd any_action = Eigen::MatrixXd::Zero(n, n);
    for (const auto& p : mdp.transition) any_action += p;
    if (!strongly_connected(support_graph(any_action)))
      throw MultichainError(
          "time-averaged best response needs a communicating MDP on the extended states");
    // Relative value iteration on the aperiodicity-transformed kernel
    // 0.5 P + 0.5 I, which has the same gain.
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    double gain = 0.0;
    for (long it = 0;; ++it) {
      Eigen::VectorXd next(n);
      for (int x = 0; x < n; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < own; ++a)
          best = std::max(best, mdp.reward(x, a) + 0.5 * mdp.transition[a].row(x).dot(h) + 0.5 * h(x));
        next(x) = best;
      }
      const Eigen::VectorXd diff = next - h;
      const double lo = diff.minCoeff();
      const double hi = diff.maxCoeff();
      h = next.array() - next(0);
      if (hi - lo <= 1e-11) {
        gain = 0.5 * (lo + hi);
        break;
      }
      if (it > 10'000'000) throw SolverError("relative value iteration did not converge");
    }
    std::fill(best_response.begin(), best_response.end(), gain);
  }

  double worst = 0.0;
  for (int s = 0; s < game.num_states(); ++s)
    worst = std::max(worst, best_response[s] - evaluate_infinite(game, profile, s, agent));
  return worst;
}

BoundReport bound_report(const StochasticGame& game, const EpisodicProfile& profile,
                         std::optional<double> tau) {
  check_profile(game, profile);
  BoundReport report;
  report.episode_length = profile[0].episode_length();
  report.tau = tau;
  report.delta = delta(game, profile);
  for (int i = 0; i < kNumAgents; ++i) {
    report.gamma[i] = game.gamma(i);
    const BestResponseResult br = finite_best_response(game, profile, i);
    report.eps_hat[i] = std::max(0.0, br.eps_hat);
    report.exploit_finite[i] = report.eps_hat[i];
    report.epsilon[i] =
        epsilon_bound(report.delta[i], report.eps_hat[i], report.gamma[i], report.episode_length);
    if (tau) {
      report.xi[i] = *tau * std::log(static_cast<double>(game.num_actions(i)));
      report.epsilon_learning[i] = epsilon_bound_learning(
          report.delta[i], *tau, game.num_actions(i), report.gamma[i], report.episode_length);
    }
    try {
      report.exploit_infinite[i] = infinite_exploitability(game, profile, i);
    } catch (const MultichainError& e) {
      report.notes[i] = e.what();
    }
  }
  return report;
}

}  // namespace episodic
