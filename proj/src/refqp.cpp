#include "iksvm/refqp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_config(const QpConfig& cfg) {
  if (!(cfg.tol > 0.0) || !std::isfinite(cfg.tol)) {
    throw ValidationError("KKT tolerance must be positive and finite");
  }
  if (cfg.max_pair_steps <= 0) {
    throw ValidationError("pair-update budget must be positive");
  }
}

void check_binary_labels(const Vector& y, Eigen::Index n) {
  if (y.size() != n) {
    throw ValidationError("label vector has length " + std::to_string(y.size()) +
                          " but the kernel has " + std::to_string(n) + " rows");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) {
      throw ValidationError("labels must be +1 or -1, got " + std::to_string(y[i]) +
                            " at index " + std::to_string(i));
    }
  }
}

void require_psd(const SymmetricMatrix& k, const char* where) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(k.m(), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-8 * std::max(1.0, k.frobenius_norm())) {
    throw ValidationError(std::string(where) + ": kernel is indefinite (smallest eigenvalue " +
                          std::to_string(lo) +
                          "); set allow_indefinite to accept a stationary point instead of a "
                          "certified optimum");
  }
}

double majority_label(const Vector& y) { return y.sum() >= 0.0 ? 1.0 : -1.0; }

// Offset implied by the KKT conditions at the state (beta, gradient): average
// of -sigma_t * g_t over coordinates strictly inside the box, else the
// midpoint of the interval bracketed by the boundary coordinates (one-sided
// intervals yield their finite endpoint). `edge` is the dead zone within
// which a coordinate counts as sitting on its bound.
double bias_from_state(const Vector& g, const Vector& sigma, const Vector& beta,
                       const Vector& cap, double edge) {
  double bias_sum = 0.0;
  long free_count = 0;
  double best_up = -kInf;
  double best_low = kInf;
  for (Eigen::Index t = 0; t < beta.size(); ++t) {
    const double score = -sigma[t] * g[t];
    const bool above_lo = beta[t] > edge;
    const bool below_hi = beta[t] < cap[t] - edge;
    if (above_lo && below_hi) {
      bias_sum += score;
      ++free_count;
    }
    const bool plus = sigma[t] > 0.0;
    if (plus ? below_hi : above_lo) best_up = std::max(best_up, score);
    if (plus ? above_lo : below_hi) best_low = std::min(best_low, score);
  }
  if (free_count > 0) return bias_sum / static_cast<double>(free_count);
  if (std::isfinite(best_up) && std::isfinite(best_low)) return 0.5 * (best_up + best_low);
  if (std::isfinite(best_up)) return best_up;
  if (std::isfinite(best_low)) return best_low;
  return 0.0;
}

struct CoreResult {
  Vector beta;
  double min_value = 0.0;
  double bias = 0.0;
  double kkt_violation = 0.0;
  long iterations = 0;
  std::vector<double> value_trace;
};

// Minimizes 1/2 beta'Q beta + p'beta over { 0 <= beta <= cap, sigma'beta
// fixed at its starting value }, sigma in {-1,+1}^n, by exact line search on the
// most-violating coordinate pair. Along a concave direction (possible only
// for indefinite Q) the step runs to the box boundary. The returned bias is
// the free-coordinate average of -sigma_t * grad_t, or the midpoint of the
// final violating-pair interval when no coordinate is strictly inside the
// box; for every dual this module builds, that value is exactly the decision
// -function offset.
CoreResult smo_core(const Matrix& q, const Vector& p, const Vector& sigma, Vector beta,
                    const Vector& cap, const QpConfig& cfg) {
  const Eigen::Index n = p.size();
  Vector g = q * beta + p;
  CoreResult out;
  const auto min_value = [&]() { return 0.5 * (beta.dot(g) + beta.dot(p)); };

  long iter = 0;
  double best_up = -kInf;
  double best_low = kInf;
  while (true) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    best_up = -kInf;
    best_low = kInf;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double score = -sigma[t] * g[t];
      const bool plus = sigma[t] > 0.0;
      if ((plus ? beta[t] < cap[t] : beta[t] > 0.0) && score > best_up) {
        best_up = score;
        i = t;
      }
      if ((plus ? beta[t] > 0.0 : beta[t] < cap[t]) && score < best_low) {
        best_low = score;
        j = t;
      }
    }
    if (i < 0 || j < 0 || best_up - best_low <= cfg.tol) break;
    if (iter >= cfg.max_pair_steps) {
      throw ConvergenceError("dual solver exhausted " + std::to_string(cfg.max_pair_steps) +
                             " pair updates with KKT violation " +
                             std::to_string(best_up - best_low));
    }

    // Direction d with d_i = sigma_i, d_j = -sigma_j keeps sigma'beta fixed.
    double curv = q(i, i) + q(j, j) - 2.0 * sigma[i] * sigma[j] * q(i, j);
    if (curv <= 0.0) curv = 1e-12;
    const double slope = sigma[i] * g[i] - sigma[j] * g[j];  // -(best_up - best_low) < 0
    const double room_i = sigma[i] > 0.0 ? cap[i] - beta[i] : beta[i];
    const double room_j = sigma[j] > 0.0 ? beta[j] : cap[j] - beta[j];
    const double step = std::min({-slope / curv, room_i, room_j});
    const double di = sigma[i] * step;
    const double dj = -sigma[j] * step;
    beta[i] += di;
    beta[j] += dj;
    // Snap coordinates that hit their bound so set membership stays exact.
    if (step == room_i) beta[i] = sigma[i] > 0.0 ? cap[i] : 0.0;
    if (step == room_j) beta[j] = sigma[j] > 0.0 ? 0.0 : cap[j];
    g += di * q.col(i) + dj * q.col(j);
    ++iter;
    if (cfg.record_objective_every > 0 && iter % cfg.record_objective_every == 0) {
      out.value_trace.push_back(min_value());
    }
  }

  out.bias = bias_from_state(g, sigma, beta, cap, 0.0);
  out.kkt_violation =
      (std::isfinite(best_up) && std::isfinite(best_low)) ? std::max(0.0, best_up - best_low)
                                                          : 0.0;
  out.min_value = min_value();
  if (cfg.record_objective_every > 0) out.value_trace.push_back(out.min_value);
  out.iterations = iter;
  out.beta = std::move(beta);
  return out;
}

void fill_common(QpSolution& sol, const CoreResult& core, double support_scale) {
  sol.objective = -core.min_value;
  sol.bias = core.bias;
  sol.kkt_violation = core.kkt_violation;
  sol.iterations = core.iterations;
  sol.objective_trace.clear();
  sol.objective_trace.reserve(core.value_trace.size());
  for (double v : core.value_trace) sol.objective_trace.push_back(-v);
  sol.support_indices.clear();
  const double thresh = 1e-12 * std::max(1.0, support_scale);
  for (Eigen::Index t = 0; t < sol.alpha.size(); ++t) {
    if (std::abs(sol.alpha[t]) > thresh) sol.support_indices.push_back(t);
  }
}

}  // namespace

QpSolution solve_svm_dual(const SymmetricMatrix& k, const Vector& y, double c,
                          const QpConfig& cfg) {
  check_config(cfg);
  const Eigen::Index n = k.size();
  check_binary_labels(y, n);
  if (!std::isfinite(c) || c < 0.0) {
    throw ValidationError("box bound c must be nonnegative and finite");
  }
  if (!cfg.allow_indefinite) require_psd(k, "solve_svm_dual");

  QpSolution sol;
  if (c == 0.0) {
    sol.alpha = Vector::Zero(n);
    sol.bias = majority_label(y);
    return sol;
  }
  const Matrix q = k.m().cwiseProduct(y * y.transpose());
  const CoreResult core = smo_core(q, Vector::Constant(n, -1.0), y, Vector::Zero(n),
                                   Vector::Constant(n, c), cfg);
  sol.alpha = core.beta;
  fill_common(sol, core, c);
  // With an empty support set the decision function is the constant bias;
  // predict the majority class.
  if (sol.support_indices.empty()) sol.bias = majority_label(y);
  return sol;
}

QpSolution solve_svr_dual(const SymmetricMatrix& k, const Vector& targets, double c,
                          double epsilon_tube, const QpConfig& cfg) {
  check_config(cfg);
  const Eigen::Index n = k.size();
  if (targets.size() != n) {
    throw ValidationError("target vector has length " + std::to_string(targets.size()) +
                          " but the kernel has " + std::to_string(n) + " rows");
  }
  if (!targets.allFinite()) throw ValidationError("targets must be finite");
  if (!std::isfinite(c) || c < 0.0) {
    throw ValidationError("box bound c must be nonnegative and finite");
  }
  if (!std::isfinite(epsilon_tube) || epsilon_tube < 0.0) {
    throw ValidationError("tube width must be nonnegative and finite");
  }
  if (!cfg.allow_indefinite) require_psd(k, "solve_svr_dual");

  QpSolution sol;
  if (c == 0.0) {
    sol.alpha = Vector::Zero(n);
    sol.bias = 0.5 * (targets.maxCoeff() + targets.minCoeff());
    return sol;
  }
  // Split coefficients: beta = pos - neg with pos, neg in [0, c]; the L1 term
  // becomes linear because the optimum never keeps both halves active.
  const Eigen::Index n2 = 2 * n;
  Matrix q(n2, n2);
  q.topLeftCorner(n, n) = k.m();
  q.bottomRightCorner(n, n) = k.m();
  q.topRightCorner(n, n) = -k.m();
  q.bottomLeftCorner(n, n) = -k.m();
  Vector p(n2);
  p.head(n) = Vector::Constant(n, epsilon_tube) - targets;
  p.tail(n) = Vector::Constant(n, epsilon_tube) + targets;
  Vector sigma(n2);
  sigma.head(n).setOnes();
  sigma.tail(n).setConstant(-1.0);
  const CoreResult core =
      smo_core(q, p, sigma, Vector::Zero(n2), Vector::Constant(n2, c), cfg);
  sol.alpha = core.beta.head(n) - core.beta.tail(n);
  fill_common(sol, core, c);
  return sol;
}

QpSolution solve_one_class_dual(const SymmetricMatrix& k, double nu, Eigen::Index l,
                                const QpConfig& cfg) {
  check_config(cfg);
  const Eigen::Index n = k.size();
  if (!std::isfinite(nu) || nu <= 0.0 || nu > 1.0) {
    throw ValidationError("nu must lie in (0, 1]");
  }
  if (l < 1) throw ValidationError("sample count l must be at least 1");
  const double nl = nu * static_cast<double>(l);
  if (nl < 1.0) {
    throw ValidationError("nu*l = " + std::to_string(nl) +
                          " < 1: the box [0, 1/(nu*l)] cannot hold e'alpha = 1");
  }
  const double cap = 1.0 / nl;
  if (static_cast<double>(n) * cap < 1.0 - 1e-12) {
    throw ValidationError("kernel has " + std::to_string(n) +
                          " rows but n/(nu*l) < 1: e'alpha = 1 is infeasible");
  }
  if (!cfg.allow_indefinite) require_psd(k, "solve_one_class_dual");

  // Feasible start: floor(nu*l) coordinates at the cap, the remainder on the
  // next one.
  Vector beta0 = Vector::Zero(n);
  const Eigen::Index at_cap = std::min<Eigen::Index>(static_cast<Eigen::Index>(nl), n);
  for (Eigen::Index t = 0; t < at_cap; ++t) beta0[t] = cap;
  const double rem = 1.0 - cap * static_cast<double>(at_cap);
  if (rem > 0.0 && at_cap < n) beta0[at_cap] = std::min(rem, cap);

  const CoreResult core = smo_core(k.m(), Vector::Zero(n), Vector::Ones(n), std::move(beta0),
                                   Vector::Constant(n, cap), cfg);
  QpSolution sol;
  sol.alpha = core.beta;
  fill_common(sol, core, cap);
  return sol;
}

GapBound gap_bound(const Objective& objective, const Vector& alpha, const QpConfig& cfg,
                   QpSolution* inner) {
  check_config(cfg);
  const TrainingProblem& pr = objective.problem();
  const Eigen::Index n = pr.size();
  if (alpha.size() != n) {
    throw ValidationError("coefficient vector has length " + std::to_string(alpha.size()) +
                          " but the problem has " + std::to_string(n) + " points");
  }
  if (!alpha.allFinite()) throw ValidationError("coefficient vector must be finite");
  const double box_slack = 1e-7 * std::max(1.0, pr.box_hi());
  if ((alpha.array() < pr.box_lo() - box_slack).any() ||
      (alpha.array() > pr.box_hi() + box_slack).any()) {
    throw ValidationError("coefficients violate the box constraints");
  }
  const double eq_resid = std::abs(pr.equality_coeffs().dot(alpha) - pr.equality_rhs());
  if (eq_resid > 1e-6 * std::max(1.0, static_cast<double>(n) * pr.box_hi())) {
    throw ValidationError("coefficients violate the equality constraint (residual " +
                          std::to_string(eq_resid) + ")");
  }

  const ProxyKernel star = objective.proxy_at(alpha);
  // Tighter inner solve than the standalone default: the certified upper
  // bound degrades by roughly (KKT violation) * (sum of caps), and the bound
  // must stay valid to ~1e-8 even at the outer optimum.
  QpConfig inner_cfg = cfg;
  inner_cfg.tol = std::min(cfg.tol, 1e-8);
  inner_cfg.record_objective_every = 0;

  QpSolution dual;
  switch (pr.variant) {
    case Variant::kClassification:
    case Variant::kPerturb:
    case Variant::kWeighted:
      dual = solve_svm_dual(star.materialized, pr.y, pr.c, inner_cfg);
      break;
    case Variant::kSvr:
      dual = solve_svr_dual(star.materialized, pr.y, pr.c, pr.epsilon_tube, inner_cfg);
      break;
    case Variant::kOneClass:
      dual = solve_one_class_dual(star.materialized, pr.nu, n, inner_cfg);
      break;
  }
  const double omega = dual.objective;
  if (inner) *inner = std::move(dual);

  const Matrix diff = star.materialized.m() - pr.k0.m();
  double penalty = 0.0;
  if (pr.variant == Variant::kWeighted) {
    const Vector& h = pr.weights->h;
    penalty = (h * h.transpose()).cwiseProduct(diff.cwiseAbs2()).sum();
  } else {
    penalty = pr.rho * diff.squaredNorm();
  }

  GapBound out;
  out.upper = omega + penalty;
  out.gap = out.upper - objective.direct_value(alpha);
  return out;
}

GapBound gap_bound(const TrainingProblem& problem, const Vector& alpha, const QpConfig& cfg) {
  const Objective objective(problem, SmoothingConfig::for_kernel(problem.k0));
  return gap_bound(objective, alpha, cfg);
}

double recover_bias(const TrainingProblem& problem, const SymmetricMatrix& kernel,
                    const Vector& alpha) {
  const Eigen::Index n = problem.size();
  if (kernel.size() != n) {
    throw ValidationError("kernel has " + std::to_string(kernel.size()) +
                          " rows but the problem has " + std::to_string(n) + " points");
  }
  if (alpha.size() != n || !alpha.allFinite()) {
    throw ValidationError("coefficient vector must be finite with length " + std::to_string(n));
  }
  const double edge = 1e-10 * std::max(1.0, problem.box_hi());

  switch (problem.variant) {
    case Variant::kClassification:
    case Variant::kPerturb:
    case Variant::kWeighted: {
      const Vector s = kernel.m() * alpha.cwiseProduct(problem.y);
      const Vector g = s.cwiseProduct(problem.y) - Vector::Ones(n);
      return bias_from_state(g, problem.y, alpha, Vector::Constant(n, problem.c), edge);
    }
    case Variant::kSvr: {
      // Reconstruct the split coefficients the dual solver works with.
      Vector beta(2 * n);
      beta.head(n) = alpha.cwiseMax(0.0);
      beta.tail(n) = (-alpha).cwiseMax(0.0);
      const Vector s = kernel.m() * alpha;
      Vector g(2 * n);
      g.head(n) = (s.array() + problem.epsilon_tube - problem.y.array()).matrix();
      g.tail(n) = (-s.array() + problem.epsilon_tube + problem.y.array()).matrix();
      Vector sigma(2 * n);
      sigma.head(n).setOnes();
      sigma.tail(n).setConstant(-1.0);
      return bias_from_state(g, sigma, beta, Vector::Constant(2 * n, problem.c), edge);
    }
    case Variant::kOneClass: {
      const Vector g = kernel.m() * alpha;
      return bias_from_state(g, Vector::Ones(n), alpha, Vector::Constant(n, problem.c), edge);
    }
  }
  return 0.0;  // unreachable
}

namespace {

Vector model_coefficients(const TrainedModel& model) {
  const Eigen::Index n = model.alpha.size();
  if (n == 0) throw ValidationError("model has no training coefficients");
  if (!model.alpha.allFinite()) throw ValidationError("model coefficients must be finite");
  switch (model.variant) {
    case Variant::kClassification:
    case Variant::kPerturb:
    case Variant::kWeighted:
      check_binary_labels(model.labels, n);
      return model.alpha.cwiseProduct(model.labels);
    default:
      return model.alpha;
  }
}

}  // namespace

Vector decision_values(const TrainedModel& model, const SymmetricMatrix& full_kernel,
                       const std::vector<Eigen::Index>& test_indices) {
  const Vector coef = model_coefficients(model);
  const Eigen::Index n = coef.size();
  if (full_kernel.size() < n) {
    throw ValidationError("full kernel has " + std::to_string(full_kernel.size()) +
                          " rows; the first " + std::to_string(n) +
                          " must be the training points");
  }
  Vector out(static_cast<Eigen::Index>(test_indices.size()));
  for (std::size_t i = 0; i < test_indices.size(); ++i) {
    const Eigen::Index idx = test_indices[i];
    if (idx < 0 || idx >= full_kernel.size()) {
      throw ValidationError("test index " + std::to_string(idx) + " is out of range for a " +
                            std::to_string(full_kernel.size()) + "-row kernel");
    }
    out[static_cast<Eigen::Index>(i)] = full_kernel.m().row(idx).head(n).dot(coef) + model.bias;
  }
  return out;
}

Vector predict(const TrainedModel& model, const SymmetricMatrix& full_kernel,
               const std::vector<Eigen::Index>& test_indices) {
  const Vector coef = model_coefficients(model);
  if ((coef.array().abs() <= 1e-12).all()) {
    const double label = model.labels.size() > 0 ? majority_label(model.labels) : 1.0;
    std::cerr << "warning: model has no support vectors; predicting the majority training "
                 "label ("
              << (label > 0 ? "+1" : "-1") << ") for all points\n";
    return Vector::Constant(static_cast<Eigen::Index>(test_indices.size()), label);
  }
  const Vector f = decision_values(model, full_kernel, test_indices);
  return f.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace iksvm
