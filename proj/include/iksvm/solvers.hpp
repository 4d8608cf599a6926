#pragma once

#include <optional>
#include <vector>

#include "iksvm/model.hpp"
#include "iksvm/objective.hpp"
#include "iksvm/refqp.hpp"
#include "iksvm/types.hpp"

namespace iksvm {

// The polytope every training variant optimizes over: a coordinate box
// [lo, hi]^n intersected with one linear equality a'x = rhs (labels for
// classification, ones otherwise).
struct FeasibleBox {
  Vector equality;  // entries +/-1
  double rhs = 0.0;
  double lo = 0.0;
  double hi = 1.0;

  static FeasibleBox from_problem(const TrainingProblem& problem);

  Eigen::Index size() const { return equality.size(); }
  // Throws ValidationError when the box cannot meet the equality.
  void validate() const;
  bool contains(const Vector& x, double tol) const;
};

// Euclidean projection onto the box-with-equality polytope. The projection is
// clamp(alpha_hat + nu * a, lo, hi) for the multiplier nu that restores the
// equality; nu is located by sorting the 2n breakpoints of the monotone map
// nu -> a' clamp(alpha_hat + nu a). O(n log n). Already-feasible inputs are
// returned bit-for-bit unchanged.
Vector project_onto_feasible(const Vector& alpha_hat, const FeasibleBox& box);

// A bag of halfspaces a_j' x <= b_j (rows of `a`), optionally confined to the
// affine set equality'x = rhs which centering maintains exactly. Rows flagged
// original are the immutable problem faces; only added cuts are ever pruned.
struct LocalizationSet {
  Matrix a;  // m x n
  Vector b;  // m
  std::vector<bool> original;
  Vector equality;  // empty -> no affine restriction
  double eq_rhs = 0.0;

  Eigen::Index rows() const { return b.size(); }
  // Slack vector b - a x (all entries must stay positive at interior points).
  Vector slack(const Vector& x) const { return b - a * x; }
  void append_row(const Vector& normal, double offset, bool is_original);
};

struct CenterResult {
  Vector center;
  SymmetricMatrix hessian;  // log-barrier Hessian at the center
};

// Damped-Newton minimizer of the log barrier -sum log(b_j - a_j'x), holding
// the equality (when present) exactly. Converges to projected-gradient norm
// <= 1e-8. Throws ValidationError if `start` is not strictly feasible and
// ConvergenceError when the set is unbounded or degenerate enough that the
// barrier has no minimizer.
CenterResult analytic_center(const LocalizationSet& set, const Vector& start);

// Drop the least relevant added cuts until at most max_rows rows remain.
// Relevance follows the barrier geometry at `center` (with barrier Hessian
// `hessian`): a' H^-1 a / slack^2. Rows flagged original are never dropped,
// and a cut with zero slack at the center is always kept.
void prune_localization(LocalizationSet& set, const SymmetricMatrix& hessian,
                        const Vector& center, Eigen::Index max_rows);

struct PgConfig {
  // Step k uses step_scale / k; 0 picks the variant default (10 for the
  // PSD-perturbation variant, 5 otherwise).
  double step_scale = 0.0;
  int max_iter = 2000;
  double gap_tol = 1e-3;
  // Duality-gap evaluation cadence (each costs one fixed-kernel dual solve).
  int gap_every = 10;
  std::optional<SmoothingConfig> smoothing;  // default: SmoothingConfig::for_kernel
  QpConfig qp;                               // settings for the gap solves
};

// Maximizes the smoothed objective by alpha <- project(alpha + t_k grad),
// t_k = step_scale / k. Stops as soon as a certified duality gap falls to
// gap_tol; otherwise runs max_iter iterations and reports the iteration-limit
// status. The returned model carries the best gap-evaluated iterate and one
// trace row per gap evaluation.
TrainedModel projected_gradient_solve(const TrainingProblem& problem, const PgConfig& cfg = {});

struct AccpmConfig {
  int max_iter = 0;  // 0 -> 5n
  double gap_tol = 1e-3;
  // Added cuts are pruned back to this multiple of n; the immutable box
  // faces do not count against the budget.
  int max_rows_factor = 3;
  std::optional<SmoothingConfig> smoothing;
  QpConfig qp;  // settings for the final certificate solve
};

// Cutting-plane maximization: each iteration centers the localization set,
// cuts with the supergradient halfspace at the center, and reads an upper
// bound from the row-count-inflated Dikin ellipsoid around the center. Stops
// when (monotone) upper bound minus best objective reaches gap_tol.
TrainedModel accpm_solve(const TrainingProblem& problem, const AccpmConfig& cfg = {});

struct ExchangeConfig {
  int max_iter = 100;  // outer kernel-adding iterations
  double gap_tol = 1e-3;
  // Inner master: projected subgradient with Polyak steps.
  long master_max_iter = 10'000;
  // Constraints slack for this many consecutive outer iterations are dropped.
  int prune_after = 5;
  double prune_slack = 1e-6;
  QpConfig qp;  // first master is an exact fixed-kernel dual solve
};

// Kernel-exchange maximization (two-class variant only): grow a finite set of
// candidate kernels K_1 = clamped base, K_{i+1} = learned kernel at the
// current master solution, and maximize the worst case over the set. Stops
// when the newest kernel no longer cuts the master value by more than
// gap_tol.
TrainedModel exchange_solve(const TrainingProblem& problem, const ExchangeConfig& cfg = {});

}  // namespace iksvm
