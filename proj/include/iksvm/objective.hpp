#pragma once

#include <optional>

#include "iksvm/proxy.hpp"
#include "iksvm/types.hpp"

namespace iksvm {

// A fully-specified training instance: base kernel, supervision, penalties,
// and the formulation variant. Construct through the named factories, which
// validate the variant-specific fields.
struct TrainingProblem {
  Variant variant = Variant::kClassification;
  SymmetricMatrix k0;
  Vector y;             // +/-1 labels; real targets for regression; empty for one-class
  double c = 1.0;       // box scale (see box_lo/box_hi)
  double rho = 1.0;     // kernel-deviation penalty (1 for the weighted variant)
  double epsilon_tube = 0.0;  // regression insensitivity
  double nu = 0.0;            // one-class parameter
  std::optional<PenaltyWeights> weights;

  static TrainingProblem classification(SymmetricMatrix k0, Vector y, double c, double rho);
  static TrainingProblem svr(SymmetricMatrix k0, Vector targets, double c, double rho,
                             double epsilon_tube);
  static TrainingProblem one_class(SymmetricMatrix k0, double nu, double rho);
  // Requires a PSD base kernel; the learned kernel is the unprojected rank-one
  // perturbation.
  static TrainingProblem perturb(SymmetricMatrix k0, Vector y, double c, double rho);
  static TrainingProblem weighted(SymmetricMatrix k0, Vector y, double c,
                                  PenaltyWeights weights);

  Eigen::Index size() const { return k0.size(); }

  // Coefficient box: [0, C] for labeled variants, [-C, C] for regression,
  // [0, 1/(nu*l)] for one-class (c stores that cap).
  double box_lo() const { return variant == Variant::kSvr ? -c : 0.0; }
  double box_hi() const { return c; }
  // Linear equality a'alpha = b completing the feasible set.
  Vector equality_coeffs() const;
  double equality_rhs() const { return variant == Variant::kOneClass ? 1.0 : 0.0; }
};

// Moreau-Yosida smoothing width for the positive-part function.
struct SmoothingConfig {
  double epsilon;

  explicit SmoothingConfig(double eps);
  // Default width used throughout: 1e-6 times the base kernel's Frobenius norm.
  static SmoothingConfig for_kernel(const SymmetricMatrix& k0);
};

struct SmoothMaxResult {
  double value;
  double slope;
};

// Smoothed max(0, f): value = max_{0<=u<=1} (u f - eps/2 u^2), attained at
// u* = clamp(f/eps, 0, 1); slope is u*. Uniformly within eps/2 of max(0, f).
SmoothMaxResult smooth_max(double f, const SmoothingConfig& cfg);

struct ObjectiveEval {
  double value = 0.0;
  Vector gradient;
  std::optional<ProxyKernel> proxy;  // the learned kernel at this alpha, if requested
  int eig_eval_count = 0;            // cumulative rank-one decompositions so far
};

// The smoothed concave objective max_alpha min_K of the joint problem, with
// the inner minimum eliminated in closed form. One instance caches the base
// kernel decomposition; each evaluation costs a rank-one eigendecomposition
// update (none at all for the perturbation variant).
class Objective {
 public:
  Objective(TrainingProblem problem, SmoothingConfig cfg);

  const TrainingProblem& problem() const { return problem_; }
  const SmoothingConfig& smoothing() const { return cfg_; }

  // Smoothed value and exact gradient of the smoothed function at alpha.
  // Materializing the learned kernel costs an extra O(n^3); skip it when only
  // the value/gradient are needed.
  ObjectiveEval evaluate(const Vector& alpha, bool with_proxy = false) const;

  // Unsmoothed objective (hard positive part, hard absolute values). This is
  // the quantity duality gaps are measured against.
  double direct_value(const Vector& alpha) const;

  // The learned kernel at alpha (hard positive part).
  ProxyKernel proxy_at(const Vector& alpha) const;

  int eig_eval_count() const { return eig_evals_; }

 private:
  const ProxyFactory& factory() const;

  TrainingProblem problem_;
  SmoothingConfig cfg_;
  mutable std::optional<ProxyFactory> factory_;
  mutable int eig_evals_ = 0;
};

// One-shot evaluation (builds a transient Objective).
ObjectiveEval evaluate(const TrainingProblem& problem, const Vector& alpha,
                       const SmoothingConfig& cfg);

// Central finite-difference audit of the gradient (step 1e-5 per coordinate);
// returns the maximum relative error over coordinates. Requires alpha far
// enough inside the box that the probes stay inside.
double check_gradient(const TrainingProblem& problem, const Vector& alpha,
                      const SmoothingConfig& cfg);

}  // namespace iksvm
