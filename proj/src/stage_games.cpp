#include "episodic/stage_games.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace episodic {

void smoothed_best_response_into(const Eigen::Ref<const Eigen::VectorXd>& q, double tau,
                                 Eigen::VectorXd& out) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (q.size() == 0) throw std::invalid_argument("empty payoff vector");
  if (!q.allFinite()) throw std::invalid_argument("payoff vector must be finite");
  const double top = q.maxCoeff();
  // std::exp underflows to exactly 0 where Eigen's packet exp clamps.
  out = ((q.array() - top) / tau).unaryExpr([](double x) { return std::exp(x); });
  out /= out.sum();
}

Eigen::VectorXd smoothed_best_response(const Eigen::VectorXd& q, double tau) {
  Eigen::VectorXd p;
  smoothed_best_response_into(q, tau, p);
  return p;
}

double entropy_gap(const Eigen::VectorXd& q, double tau) {
  const Eigen::VectorXd p = smoothed_best_response(q, tau);
  return std::max(0.0, q.maxCoeff() - p.dot(q));
}

bool is_zero_sum(const MatrixGame& g, double tol) {
  return (g.u1 + g.u2).cwiseAbs().maxCoeff() <= tol;
}

bool is_identical_interest(const MatrixGame& g, double tol) {
  return (g.u1 - g.u2).cwiseAbs().maxCoeff() <= tol;
}

std::optional<Eigen::MatrixXd> find_potential(const MatrixGame& g, double tol) {
  const int n1 = g.rows();
  const int n2 = g.cols();
  Eigen::MatrixXd phi(n1, n2);
  for (int a1 = 0; a1 < n1; ++a1) {
    const double base = g.u1(a1, 0) - g.u1(0, 0);
    for (int a2 = 0; a2 < n2; ++a2) phi(a1, a2) = base + g.u2(a1, a2) - g.u2(a1, 0);
  }
  // Every unilateral deviation of either agent must match the potential.
  for (int a2 = 0; a2 < n2; ++a2)
    for (int a1 = 0; a1 < n1; ++a1)
      for (int b1 = 0; b1 < n1; ++b1)
        if (std::abs((g.u1(a1, a2) - g.u1(b1, a2)) - (phi(a1, a2) - phi(b1, a2))) > tol)
          return std::nullopt;
  for (int a1 = 0; a1 < n1; ++a1)
    for (int a2 = 0; a2 < n2; ++a2)
      for (int b2 = 0; b2 < n2; ++b2)
        if (std::abs((g.u2(a1, a2) - g.u2(a1, b2)) - (phi(a1, a2) - phi(a1, b2))) > tol)
          return std::nullopt;
  return phi;
}

std::optional<std::array<Eigen::VectorXd, 2>> strategic_equivalence_offset(
    const MatrixGame& g, const MatrixGame& reference, double tol) {
  if (g.rows() != reference.rows() || g.cols() != reference.cols())
    throw std::invalid_argument("games have different shapes");
  const Eigen::MatrixXd d1 = g.u1 - reference.u1;
  const Eigen::MatrixXd d2 = g.u2 - reference.u2;
  // Agent 1's offset may vary with a2 only, agent 2's with a1 only.
  Eigen::VectorXd off1 = d1.row(0).transpose();
  Eigen::VectorXd off2 = d2.col(0);
  for (int a1 = 0; a1 < g.rows(); ++a1)
    for (int a2 = 0; a2 < g.cols(); ++a2)
      if (std::abs(d1(a1, a2) - off1(a2)) > tol || std::abs(d2(a1, a2) - off2(a1)) > tol)
        return std::nullopt;
  return std::array<Eigen::VectorXd, 2>{off1, off2};
}

namespace {

// Dense tableau simplex for: maximize 1'y subject to a*y <= 1, y >= 0, with a
// strictly positive. The origin is feasible, so no phase one is needed.
// Bland's rule prevents cycling on degenerate pivots. Returns the primal y and
// the dual prices x of the row constraints.
struct PackingSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;
  double objective = 0.0;
};

PackingSolution solve_packing_lp(const Eigen::MatrixXd& a) {
  constexpr double kEps = 1e-12;
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  const int width = n + m + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, width);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.col(width - 1).head(m).setOnes();
  t.row(m).head(n).setConstant(-1.0);  // reduced costs z_j - c_j

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  for (int iter = 0; iter < 10000; ++iter) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j) {
      if (t(m, j) < -kEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;

    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
      if (t(i, enter) > kEps) best_ratio = std::min(best_ratio, t(i, width - 1) / t(i, enter));
    int leave = -1;
    for (int i = 0; i < m; ++i) {
      if (t(i, enter) > kEps && t(i, width - 1) / t(i, enter) <= best_ratio + kEps &&
          (leave < 0 || basis[i] < basis[leave]))
        leave = i;
    }
    if (leave < 0) throw std::runtime_error("packing LP unbounded");

    t.row(leave) /= t(leave, enter);
    for (int i = 0; i <= m; ++i) {
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[leave] = enter;
  }

  PackingSolution out;
  out.primal = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) out.primal(basis[i]) = t(i, width - 1);
  out.dual = t.row(m).segment(n, m).transpose();
  out.objective = t(m, width - 1);
  return out;
}

Eigen::VectorXd clean_distribution(Eigen::VectorXd p) {
  p = p.cwiseMax(0.0);
  p /= p.sum();
  return p;
}

}  // namespace

ZeroSumSolution solve_matrix_game(const Eigen::MatrixXd& a) {
  if (a.size() == 0) throw std::invalid_argument("empty matrix game");
  // Shift payoffs to be strictly positive; the value shifts by the same amount.
  const double shift = 1.0 - a.minCoeff();
  const Eigen::MatrixXd positive = a.array() + shift;
  const PackingSolution lp = solve_packing_lp(positive);

  ZeroSumSolution out;
  const double total = lp.primal.sum();
  out.value = 1.0 / total - shift;
  out.profile[0] = clean_distribution(lp.dual);
  out.profile[1] = clean_distribution(lp.primal);
  return out;
}

ZeroSumSolution solve_zero_sum(const MatrixGame& g) {
  if (!is_zero_sum(g)) throw std::invalid_argument("solve_zero_sum: game is not zero-sum");
  return solve_matrix_game(g.u1);
}

Eigen::VectorXd row_payoffs(const MatrixGame& g, const Eigen::VectorXd& col_mix) {
  return g.u1 * col_mix;
}

Eigen::VectorXd col_payoffs(const MatrixGame& g, const Eigen::VectorXd& row_mix) {
  return g.u2.transpose() * row_mix;
}

namespace {

using QPair = std::array<Eigen::VectorXd, 2>;

QPair logit_image(const MatrixGame& g, double tau, const QPair& q) {
  return {row_payoffs(g, smoothed_best_response(q[1], tau)),
          col_payoffs(g, smoothed_best_response(q[0], tau))};
}

Eigen::VectorXd stack(const QPair& q) {
  Eigen::VectorXd x(q[0].size() + q[1].size());
  x << q[0], q[1];
  return x;
}

QPair unstack(const Eigen::VectorXd& x, int n1) {
  return {x.head(n1), x.tail(x.size() - n1)};
}

Eigen::MatrixXd softmax_jacobian(const Eigen::VectorXd& p, double tau) {
  Eigen::MatrixXd d = -p * p.transpose();
  d.diagonal() += p;
  return d / tau;
}

// Newton's method on F(q) = q - u(., br(q)) with backtracking on ||F||_2.
// Returns true once the sup-norm residual is at most tol.
bool newton_solve(const MatrixGame& g, double tau, QPair& q, double tol, int max_iter,
                  int& iterations) {
  const int n1 = g.rows();
  const int n2 = g.cols();
  const int n = n1 + n2;
  auto residual_vec = [&](const QPair& x) {
    const QPair img = logit_image(g, tau, x);
    Eigen::VectorXd r(n);
    r << x[0] - img[0], x[1] - img[1];
    return r;
  };

  Eigen::VectorXd f = residual_vec(q);
  for (int it = 0; it < max_iter; ++it) {
    if (f.lpNorm<Eigen::Infinity>() <= tol) return true;
    ++iterations;
    const Eigen::VectorXd p1 = smoothed_best_response(q[0], tau);
    const Eigen::VectorXd p2 = smoothed_best_response(q[1], tau);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
    jac.block(0, n1, n1, n2) = -g.u1 * softmax_jacobian(p2, tau);
    jac.block(n1, 0, n2, n1) = -g.u2.transpose() * softmax_jacobian(p1, tau);
    const Eigen::VectorXd step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) return false;

    const Eigen::VectorXd x = stack(q);
    const double f_norm = f.norm();
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const QPair trial = unstack(x + t * step, n1);
      const Eigen::VectorXd f_trial = residual_vec(trial);
      if (f_trial.norm() < (1.0 - 1e-4 * t) * f_norm) {
        q = trial;
        f = f_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) return f.lpNorm<Eigen::Infinity>() <= tol;
  }
  return f.lpNorm<Eigen::Infinity>() <= tol;
}

}  // namespace

double logit_residual(const MatrixGame& g, double tau, const QPair& q) {
  const QPair img = logit_image(g, tau, q);
  return std::max((q[0] - img[0]).lpNorm<Eigen::Infinity>(),
                  (q[1] - img[1]).lpNorm<Eigen::Infinity>());
}

LogitFixedPoint logit_fixed_point(const MatrixGame& g, double tau, const LogitOptions& options) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (g.u1.rows() != g.u2.rows() || g.u1.cols() != g.u2.cols() || g.u1.size() == 0)
    throw std::invalid_argument("inconsistent matrix game shapes");

  const double beta = options.damping;
  LogitFixedPoint out;
  QPair q = {row_payoffs(g, Eigen::VectorXd::Constant(g.cols(), 1.0 / g.cols())),
             col_payoffs(g, Eigen::VectorXd::Constant(g.rows(), 1.0 / g.rows()))};
  QPair best = q;
  double best_residual = logit_residual(g, tau, q);
  int since_improvement = 0;

  // Damped iteration. It contracts for large tau and in many small games, but
  // it can orbit in zero-sum games at low temperature, hence the stall check.
  for (int it = 0; it < options.max_iter; ++it) {
    const double r = logit_residual(g, tau, q);
    if (r < best_residual) {
      best_residual = r;
      best = q;
      since_improvement = 0;
    } else if (++since_improvement > 200) {
      break;
    }
    if (r <= options.tol) {
      out.q = q;
      out.residual = r;
      out.iterations = it;
      return out;
    }
    const QPair img = logit_image(g, tau, q);
    q[0] = (1.0 - beta) * q[0] + beta * img[0];
    q[1] = (1.0 - beta) * q[1] + beta * img[1];
    ++out.iterations;
  }

  q = best;
  if (newton_solve(g, tau, q, options.tol, 200, out.iterations)) {
    out.q = q;
    out.residual = logit_residual(g, tau, q);
    return out;
  }

  // Continuation in temperature: start where the logit map is a contraction
  // (Lipschitz constant of u(., br(.)) is below one) and track the fixed
  // point down to the requested tau.
  const double scale = std::max({g.u1.cwiseAbs().maxCoeff(), g.u2.cwiseAbs().maxCoeff(), 1e-12});
  double t = std::max(tau, 4.0 * scale);
  q = {row_payoffs(g, Eigen::VectorXd::Constant(g.cols(), 1.0 / g.cols())),
       col_payoffs(g, Eigen::VectorXd::Constant(g.rows(), 1.0 / g.rows()))};
  while (true) {
    if (!newton_solve(g, t, q, options.tol, 200, out.iterations)) break;
    if (t == tau) {
      out.q = q;
      out.residual = logit_residual(g, tau, q);
      return out;
    }
    t = std::max(tau, t * 0.8);
  }

  const double r = logit_residual(g, tau, q);
  if (r < best_residual) {
    best_residual = r;
    best = q;
  }
  throw LogitNonConvergence(
      "logit fixed point did not converge (residual " + std::to_string(best_residual) + ")",
      best_residual);
}

}  // namespace episodic
