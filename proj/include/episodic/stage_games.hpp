#pragma once

#include <array>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

namespace episodic {

// Two-agent bimatrix game. Both payoff matrices are indexed (a1, a2): rows are
// agent 1's actions, columns agent 2's actions.
struct MatrixGame {
  Eigen::MatrixXd u1;
  Eigen::MatrixXd u2;

  int rows() const { return static_cast<int>(u1.rows()); }
  int cols() const { return static_cast<int>(u1.cols()); }
  const Eigen::MatrixXd& payoff(int agent) const { return agent == 0 ? u1 : u2; }
};

// Pair of mixed strategies; index 0 is agent 1.
using MixedProfile = std::array<Eigen::VectorXd, 2>;

inline constexpr double kZeroSumTolerance = 1e-12;
inline constexpr double kPotentialTolerance = 1e-9;

// Boltzmann distribution br(a) ∝ exp(q(a)/tau), the unique maximizer of
// <mu, q> + tau * H(mu) over the simplex. Throws std::invalid_argument for
// tau <= 0 or non-finite q.
Eigen::VectorXd smoothed_best_response(const Eigen::VectorXd& q, double tau);
// Same computation writing into a caller-owned vector (resized as needed).
void smoothed_best_response_into(const Eigen::Ref<const Eigen::VectorXd>& q, double tau,
                                 Eigen::VectorXd& out);

// max_a q(a) - <br(q), q>, which lies in [0, tau * log|A|].
double entropy_gap(const Eigen::VectorXd& q, double tau);

bool is_zero_sum(const MatrixGame& g, double tol = kZeroSumTolerance);
bool is_identical_interest(const MatrixGame& g, double tol = kZeroSumTolerance);

// Recovers a potential by path integration from (0,0) and checks every
// unilateral-deviation identity for both agents. Returned table has (0,0) = 0.
std::optional<Eigen::MatrixXd> find_potential(const MatrixGame& g,
                                              double tol = kPotentialTolerance);

// Offsets g^1(a2), g^2(a1) with u^i = reference.u^i + g^i(a^{-i}), when they
// exist. Only unit scaling is considered.
std::optional<std::array<Eigen::VectorXd, 2>> strategic_equivalence_offset(
    const MatrixGame& g, const MatrixGame& reference, double tol = kPotentialTolerance);

struct ZeroSumSolution {
  double value = 0.0;  // agent 1's minimax payoff
  MixedProfile profile;
};

// Exact minimax solution by linear programming. Throws std::invalid_argument
// if g is not zero-sum.
ZeroSumSolution solve_zero_sum(const MatrixGame& g);

// Minimax solution of the matrix game where agent 1 receives a and agent 2
// receives -a.
ZeroSumSolution solve_matrix_game(const Eigen::MatrixXd& a);

// Expected own-payoff vectors u^1(., pi2) and u^2(pi1, .).
Eigen::VectorXd row_payoffs(const MatrixGame& g, const Eigen::VectorXd& col_mix);
Eigen::VectorXd col_payoffs(const MatrixGame& g, const Eigen::VectorXd& row_mix);

struct LogitFixedPoint {
  std::array<Eigen::VectorXd, 2> q;
  double residual = 0.0;
  int iterations = 0;
};

class LogitNonConvergence : public std::runtime_error {
 public:
  LogitNonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct LogitOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  double damping = 0.5;
};

// sup-norm of q^i - u^i(., br^j(q^j)) over both agents.
double logit_residual(const MatrixGame& g, double tau, const std::array<Eigen::VectorXd, 2>& q);

// Finds q with q^i = u^i(., br^j(q^j)). Damped iteration
// q <- (1-b) q + b u(., br(q)) runs first; if it stalls, Newton's method with
// backtracking takes over from the best iterate, and as a last resort a
// temperature continuation from a contracting regime. Throws
// LogitNonConvergence carrying the best residual reached.
LogitFixedPoint logit_fixed_point(const MatrixGame& g, double tau, const LogitOptions& options = {});

}  // namespace episodic
