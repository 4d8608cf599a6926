#include "iksvm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

void check_positive(double v, const char* what) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw ValidationError(std::string(what) + " must be positive and finite");
  }
}

void check_labels(const Vector& y, Eigen::Index n) {
  if (y.size() != n) {
    throw ValidationError("label vector has length " + std::to_string(y.size()) +
                          ", kernel is " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) {
      throw ValidationError("labels must be +1 or -1, got " + std::to_string(y[i]) +
                            " at index " + std::to_string(i));
    }
  }
}

void check_alpha(const Vector& alpha, Eigen::Index n) {
  if (alpha.size() != n) {
    throw ValidationError("coefficient vector has length " + std::to_string(alpha.size()) +
                          ", problem has " + std::to_string(n) + " points");
  }
  if (!alpha.allFinite()) {
    throw ValidationError("coefficient vector must be finite");
  }
}

// Shared spectral computation for the variants whose inner minimum is a
// clipped rank-one update: eigendecompose base + u u'/(4 pen), smooth the
// eigenvalue clipping, and assemble
//   core_value = -1/2 sum_i f(l_i) s_i^2 + pen sum_i f(l_i)^2
//                - 2 pen sum_i q_i f(l_i) + pen tr(base^2)
// with s = V'u and q_i = v_i' base v_i = l_i - s_i^2/(4 pen) (the rank-one
// structure makes V' base V's diagonal available without a matrix product).
// The f = smoothed positive part; for the unsmoothed value f = max(0, l).
//
// core_grad = V ((f(l) (1 - f'(l)) + l f'(l)) o s) is d(core_value)/du; the
// eigenvector-variation terms cancel exactly against the cross terms of q,
// which is what makes the closed form this short.
struct SpectralCore {
  double value = 0.0;
  Vector grad;  // with respect to u
};

SpectralCore spectral_core(const EigenSystem& es, const Vector& u, double pen,
                           const SmoothingConfig* smoothing) {
  const Eigen::Index n = es.n();
  const Vector s = es.vectors.transpose() * u;
  Vector phi(n), slope(n);
  if (smoothing != nullptr) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const SmoothMaxResult r = smooth_max(es.values[i], *smoothing);
      phi[i] = r.value;
      slope[i] = r.slope;
    }
  } else {
    phi = es.values.cwiseMax(0.0);
    slope = (es.values.array() > 0.0).cast<double>().matrix();
  }

  // Writing the deviation charge through phi - lambda keeps every term small
  // when the clamp is inactive; expanding the squared norm instead would
  // cancel O(|K0|^2) terms and the roundoff gets multiplied by pen.
  SpectralCore out;
  double quad = 0.0, dev = 0.0, norm_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = phi[i] - es.values[i];
    quad += es.values[i] * s[i] * s[i];
    dev += d * d;
    norm_sq += s[i] * s[i];
  }
  out.value = -0.5 * quad + pen * dev + norm_sq * norm_sq / (16.0 * pen);

  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = phi[i] * (1.0 - slope[i]) + es.values[i] * slope[i];
  }
  out.grad = es.vectors * (w.cwiseProduct(s));
  return out;
}

}  // namespace

TrainingProblem TrainingProblem::classification(SymmetricMatrix k0, Vector y, double c,
                                                double rho) {
  check_labels(y, k0.size());
  check_positive(c, "misclassification penalty C");
  check_positive(rho, "kernel penalty rho");
  TrainingProblem p;
  p.variant = Variant::kClassification;
  p.k0 = std::move(k0);
  p.y = std::move(y);
  p.c = c;
  p.rho = rho;
  return p;
}

TrainingProblem TrainingProblem::svr(SymmetricMatrix k0, Vector targets, double c,
                                     double rho, double epsilon_tube) {
  if (targets.size() != k0.size() || !targets.allFinite()) {
    throw ValidationError("regression targets must be finite and match the kernel size");
  }
  check_positive(c, "regression penalty C");
  check_positive(rho, "kernel penalty rho");
  if (!(std::isfinite(epsilon_tube) && epsilon_tube >= 0.0)) {
    throw ValidationError("insensitivity width must be nonnegative and finite");
  }
  TrainingProblem p;
  p.variant = Variant::kSvr;
  p.k0 = std::move(k0);
  p.y = std::move(targets);
  p.c = c;
  p.rho = rho;
  p.epsilon_tube = epsilon_tube;
  return p;
}

TrainingProblem TrainingProblem::one_class(SymmetricMatrix k0, double nu, double rho) {
  check_positive(rho, "kernel penalty rho");
  if (!(std::isfinite(nu) && nu > 0.0 && nu <= 1.0)) {
    throw ValidationError("one-class parameter nu must lie in (0, 1]");
  }
  const double l = double(k0.size());
  if (nu * l < 1.0) {
    throw ValidationError("one-class parameter nu too small: nu * l must be at least 1");
  }
  TrainingProblem p;
  p.variant = Variant::kOneClass;
  p.k0 = std::move(k0);
  p.c = 1.0 / (nu * l);
  p.rho = rho;
  p.nu = nu;
  return p;
}

TrainingProblem TrainingProblem::perturb(SymmetricMatrix k0, Vector y, double c,
                                         double rho) {
  check_labels(y, k0.size());
  check_positive(c, "misclassification penalty C");
  check_positive(rho, "kernel penalty rho");
  const double min_eig = eig(k0).values.minCoeff();
  if (min_eig < -1e-8 * std::max(1.0, k0.frobenius_norm())) {
    throw ValidationError(
        "the rank-one-perturbation variant needs a positive semidefinite base "
        "kernel; smallest eigenvalue is " +
        std::to_string(min_eig));
  }
  TrainingProblem p;
  p.variant = Variant::kPerturb;
  p.k0 = std::move(k0);
  p.y = std::move(y);
  p.c = c;
  p.rho = rho;
  return p;
}

TrainingProblem TrainingProblem::weighted(SymmetricMatrix k0, Vector y, double c,
                                          PenaltyWeights weights) {
  check_labels(y, k0.size());
  check_positive(c, "misclassification penalty C");
  if (weights.h.size() != k0.size()) {
    throw ValidationError("penalty weights have length " +
                          std::to_string(weights.h.size()) + ", kernel is " +
                          std::to_string(k0.size()) + "x" + std::to_string(k0.size()));
  }
  TrainingProblem p;
  p.variant = Variant::kWeighted;
  p.k0 = std::move(k0);
  p.y = std::move(y);
  p.c = c;
  p.rho = 1.0;  // deviation charges come from the weights
  p.weights = std::move(weights);
  return p;
}

Vector TrainingProblem::equality_coeffs() const {
  if (variant == Variant::kSvr || variant == Variant::kOneClass) {
    return Vector::Ones(size());
  }
  return y;
}

SmoothingConfig::SmoothingConfig(double eps) : epsilon(eps) {
  check_positive(eps, "smoothing width");
}

SmoothingConfig SmoothingConfig::for_kernel(const SymmetricMatrix& k0) {
  return SmoothingConfig(1e-6 * std::max(k0.frobenius_norm(), 1e-100));
}

SmoothMaxResult smooth_max(double f, const SmoothingConfig& cfg) {
  const double u = std::clamp(f / cfg.epsilon, 0.0, 1.0);
  return SmoothMaxResult{u * f - 0.5 * cfg.epsilon * u * u, u};
}

Objective::Objective(TrainingProblem problem, SmoothingConfig cfg)
    : problem_(std::move(problem)), cfg_(cfg) {}

const ProxyFactory& Objective::factory() const {
  if (!factory_) {
    if (problem_.variant == Variant::kWeighted) {
      factory_.emplace(problem_.k0, *problem_.weights);
    } else {
      factory_.emplace(problem_.k0);
    }
  }
  return *factory_;
}

ObjectiveEval Objective::evaluate(const Vector& alpha, bool with_proxy) const {
  const Eigen::Index n = problem_.size();
  check_alpha(alpha, n);

  ObjectiveEval out;
  switch (problem_.variant) {
    case Variant::kClassification: {
      const Vector u = problem_.y.cwiseProduct(alpha);
      const EigenSystem es = factory().updated_system(u, problem_.rho);
      ++eig_evals_;
      const SpectralCore core = spectral_core(es, u, problem_.rho, &cfg_);
      out.value = alpha.sum() + core.value;
      out.gradient = Vector::Ones(n) - problem_.y.cwiseProduct(core.grad);
      if (with_proxy) {
        out.proxy = ProxyKernel{problem_.k0, u, problem_.rho, true, psd_part(es)};
      }
      break;
    }
    case Variant::kSvr: {
      const EigenSystem es = factory().updated_system(alpha, problem_.rho);
      ++eig_evals_;
      const SpectralCore core = spectral_core(es, alpha, problem_.rho, &cfg_);
      double abs_sum = 0.0;
      Vector abs_grad(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const SmoothMaxResult pos = smooth_max(alpha[i], cfg_);
        const SmoothMaxResult neg = smooth_max(-alpha[i], cfg_);
        abs_sum += pos.value + neg.value;
        abs_grad[i] = pos.slope - neg.slope;
      }
      out.value = alpha.dot(problem_.y) - problem_.epsilon_tube * abs_sum + core.value;
      out.gradient = problem_.y - problem_.epsilon_tube * abs_grad - core.grad;
      if (with_proxy) {
        out.proxy = ProxyKernel{problem_.k0, alpha, problem_.rho, true, psd_part(es)};
      }
      break;
    }
    case Variant::kOneClass: {
      const EigenSystem es = factory().updated_system(alpha, problem_.rho);
      ++eig_evals_;
      const SpectralCore core = spectral_core(es, alpha, problem_.rho, &cfg_);
      out.value = core.value;
      out.gradient = -core.grad;
      if (with_proxy) {
        out.proxy = ProxyKernel{problem_.k0, alpha, problem_.rho, true, psd_part(es)};
      }
      break;
    }
    case Variant::kPerturb: {
      const Vector u = problem_.y.cwiseProduct(alpha);
      const Vector k0u = problem_.k0.m() * u;
      const double sq = alpha.squaredNorm();
      out.value = alpha.sum() - 0.5 * u.dot(k0u) - sq * sq / (16.0 * problem_.rho);
      out.gradient = Vector::Ones(n) - problem_.y.cwiseProduct(k0u) -
                     (sq / (4.0 * problem_.rho)) * alpha;
      if (with_proxy) {
        out.proxy = factory().mercer(alpha, problem_.y, problem_.rho);
      }
      break;
    }
    case Variant::kWeighted: {
      const Vector& h = problem_.weights->h;
      const Vector inv_sqrt_h = h.cwiseSqrt().cwiseInverse();
      const Vector q = problem_.y.cwiseProduct(alpha).cwiseProduct(inv_sqrt_h);
      const EigenSystem es = factory().scaled_updated_system(q);
      ++eig_evals_;
      const SpectralCore core = spectral_core(es, q, 1.0, &cfg_);
      out.value = alpha.sum() + core.value;
      out.gradient =
          Vector::Ones(n) - problem_.y.cwiseProduct(inv_sqrt_h.cwiseProduct(core.grad));
      if (with_proxy) {
        out.proxy = factory().weighted(alpha, problem_.y);
      }
      break;
    }
  }
  out.eig_eval_count = eig_evals_;
  return out;
}

double Objective::direct_value(const Vector& alpha) const {
  const Eigen::Index n = problem_.size();
  check_alpha(alpha, n);

  switch (problem_.variant) {
    case Variant::kClassification: {
      const Vector u = problem_.y.cwiseProduct(alpha);
      const EigenSystem es = factory().updated_system(u, problem_.rho);
      ++eig_evals_;
      return alpha.sum() +
             spectral_core(es, u, problem_.rho, nullptr)
                 .value;
    }
    case Variant::kSvr: {
      const EigenSystem es = factory().updated_system(alpha, problem_.rho);
      ++eig_evals_;
      return alpha.dot(problem_.y) - problem_.epsilon_tube * alpha.lpNorm<1>() +
             spectral_core(es, alpha, problem_.rho, nullptr)
                 .value;
    }
    case Variant::kOneClass: {
      const EigenSystem es = factory().updated_system(alpha, problem_.rho);
      ++eig_evals_;
      return spectral_core(es, alpha, problem_.rho, nullptr)
          .value;
    }
    case Variant::kPerturb: {
      const Vector u = problem_.y.cwiseProduct(alpha);
      const double sq = alpha.squaredNorm();
      return alpha.sum() - 0.5 * u.dot(problem_.k0.m() * u) -
             sq * sq / (16.0 * problem_.rho);
    }
    case Variant::kWeighted: {
      const Vector& h = problem_.weights->h;
      const Vector q =
          problem_.y.cwiseProduct(alpha).cwiseProduct(h.cwiseSqrt().cwiseInverse());
      const EigenSystem es = factory().scaled_updated_system(q);
      ++eig_evals_;
      return alpha.sum() +
             spectral_core(es, q, 1.0, nullptr)
                 .value;
    }
  }
  throw ValidationError("unknown variant");
}

ProxyKernel Objective::proxy_at(const Vector& alpha) const {
  check_alpha(alpha, problem_.size());
  switch (problem_.variant) {
    case Variant::kClassification:
      return factory().classification(alpha, problem_.y, problem_.rho);
    case Variant::kSvr:
    case Variant::kOneClass:
      return factory().regression(alpha, problem_.rho);
    case Variant::kPerturb:
      return factory().mercer(alpha, problem_.y, problem_.rho);
    case Variant::kWeighted:
      return factory().weighted(alpha, problem_.y);
  }
  throw ValidationError("unknown variant");
}

ObjectiveEval evaluate(const TrainingProblem& problem, const Vector& alpha,
                       const SmoothingConfig& cfg) {
  return Objective(problem, cfg).evaluate(alpha, true);
}

double check_gradient(const TrainingProblem& problem, const Vector& alpha,
                      const SmoothingConfig& cfg) {
  const double step = 1e-5;
  const Eigen::Index n = problem.size();
  check_alpha(alpha, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(alpha[i] > problem.box_lo() + step && alpha[i] < problem.box_hi() - step)) {
      throw ValidationError(
          "gradient audit needs coefficients strictly inside the box (margin " +
          std::to_string(step) + "); coordinate " + std::to_string(i) + " is " +
          std::to_string(alpha[i]));
    }
  }

  Objective obj(problem, cfg);
  const Vector grad = obj.evaluate(alpha).gradient;
  double worst = 0.0;
  Vector probe = alpha;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe[i] = alpha[i] + step;
    const double up = obj.evaluate(probe).value;
    probe[i] = alpha[i] - step;
    const double down = obj.evaluate(probe).value;
    probe[i] = alpha[i];
    const double fd = (up - down) / (2.0 * step);
    const double err =
        std::abs(fd - grad[i]) / std::max({1.0, std::abs(fd), std::abs(grad[i])});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace iksvm
