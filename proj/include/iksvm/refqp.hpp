#pragma once

#include <vector>

#include "iksvm/model.hpp"
#include "iksvm/objective.hpp"
#include "iksvm/types.hpp"

namespace iksvm {

// Options for the pairwise-coordinate dual solver.
struct QpConfig {
  // Stop once the largest Karush-Kuhn-Tucker violation (most-violating-pair
  // score) falls to this level.
  double tol = 1e-6;
  // Hard cap on pair updates; exceeding it raises ConvergenceError.
  long max_pair_steps = 10'000'000;
  // The solvers require a (numerically) positive semidefinite kernel and
  // verify that up to -1e-8 * max(1, ||K||_F) on the smallest eigenvalue.
  // Setting this flag skips the check and accepts indefinite inputs; the
  // result is then only a stationary point, not a certified optimum.
  bool allow_indefinite = false;
  // When positive, the dual objective is appended to QpSolution::
  // objective_trace every this-many pair updates (and at termination).
  long record_objective_every = 0;
};

// Result of a fixed-kernel dual solve. `objective` is the value of the
// maximization form of the dual; `alpha` holds the natural coefficients of
// the variant (net coefficients for regression). The decision function is
// f(x) = sum_i coef_i K(x_i, x) + bias with coef = alpha.*labels for
// classification and coef = alpha otherwise.
struct QpSolution {
  Vector alpha;
  double objective = 0.0;
  double bias = 0.0;
  std::vector<Eigen::Index> support_indices;
  double kkt_violation = 0.0;
  long iterations = 0;
  std::vector<double> objective_trace;  // filled only when requested
};

// Two-class soft-margin dual:
//   max  e'alpha - 1/2 (alpha.*y)' K (alpha.*y)
//   s.t. y'alpha = 0,  0 <= alpha <= c.
// c = 0 is accepted and yields the zero solution with a majority-label bias.
QpSolution solve_svm_dual(const SymmetricMatrix& k, const Vector& y, double c,
                          const QpConfig& cfg = {});

// Epsilon-insensitive regression dual over net coefficients beta:
//   max  beta'targets - epsilon_tube ||beta||_1 - 1/2 beta' K beta
//   s.t. e'beta = 0,  -c <= beta <= c.
QpSolution solve_svr_dual(const SymmetricMatrix& k, const Vector& targets, double c,
                          double epsilon_tube, const QpConfig& cfg = {});

// One-class dual:
//   max  -1/2 alpha' K alpha
//   s.t. e'alpha = 1,  0 <= alpha <= 1/(nu*l).
// Requires nu in (0, 1] and nu*l >= 1 (otherwise the box cannot hold the
// simplex constraint).
QpSolution solve_one_class_dual(const SymmetricMatrix& k, double nu, Eigen::Index l,
                                const QpConfig& cfg = {});

// A certified upper bound on the concave training objective, obtained by
// fixing the learned kernel at the current alpha and solving the matching
// fixed-kernel dual:
//   upper = omega(K_alpha) + penalty(K_alpha),  gap = upper - f(alpha).
// Weak duality makes `upper` valid for every feasible alpha, so gap >= 0 up
// to solver tolerance (>= -1e-8 in practice; the inner dual solve is
// tightened to min(cfg.tol, 1e-8) for that reason).
struct GapBound {
  double upper = 0.0;
  double gap = 0.0;
};

// When `inner` is non-null it receives the fixed-kernel dual solution that
// realized omega — its coefficients are a feasible point of the outer
// problem and often a strong candidate iterate.
GapBound gap_bound(const Objective& objective, const Vector& alpha,
                   const QpConfig& cfg = {}, QpSolution* inner = nullptr);
// Convenience overload; builds a transient Objective (one extra base-kernel
// eigendecomposition per call).
GapBound gap_bound(const TrainingProblem& problem, const Vector& alpha,
                   const QpConfig& cfg = {});

// Decision-function offset implied by the Karush-Kuhn-Tucker conditions of
// the fixed-kernel dual at the given coefficients: the average margin
// requirement over coordinates strictly inside the box, or the midpoint of
// the feasible offset interval when none are (one-sided intervals take their
// finite endpoint). Used to equip outer-solver iterates with a bias; at the
// dual optimum it coincides with QpSolution::bias.
double recover_bias(const TrainingProblem& problem, const SymmetricMatrix& kernel,
                    const Vector& alpha);

// Decision values f(x_j) = sum_i coef_i K_full(j, i) + bias for the rows of
// `full_kernel` listed in `test_indices`. The first model.alpha.size()
// rows/columns of `full_kernel` must correspond to the training points, in
// training order (assemble it with full_kernel_for_testing). For regression
// models the decision value is the predicted target.
Vector decision_values(const TrainedModel& model, const SymmetricMatrix& full_kernel,
                       const std::vector<Eigen::Index>& test_indices);

// Hard labels sign(f(x_j)) in {-1, +1} (zero maps to +1). A model with no
// support vectors predicts the majority training label for every point and
// emits a warning on stderr.
Vector predict(const TrainedModel& model, const SymmetricMatrix& full_kernel,
               const std::vector<Eigen::Index>& test_indices);

}  // namespace iksvm
