#include "iksvm/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "iksvm/proxy.hpp"
#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

FeasibleBox FeasibleBox::from_problem(const TrainingProblem& problem) {
  FeasibleBox box;
  box.equality = problem.equality_coeffs();
  box.rhs = problem.equality_rhs();
  box.lo = problem.box_lo();
  box.hi = problem.box_hi();
  box.validate();
  return box;
}

void FeasibleBox::validate() const {
  const Eigen::Index n = equality.size();
  if (n == 0) throw ValidationError("feasible set needs at least one coordinate");
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw ValidationError("box bounds must be finite with lo <= hi");
  }
  double lowest = 0.0;
  double highest = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (equality[i] != 1.0 && equality[i] != -1.0) {
      throw ValidationError("equality coefficients must be +1 or -1");
    }
    lowest += std::min(equality[i] * lo, equality[i] * hi);
    highest += std::max(equality[i] * lo, equality[i] * hi);
  }
  if (rhs < lowest - 1e-12 || rhs > highest + 1e-12) {
    throw ValidationError("equality level " + std::to_string(rhs) +
                          " is unreachable inside the box (range [" + std::to_string(lowest) +
                          ", " + std::to_string(highest) + "])");
  }
}

bool FeasibleBox::contains(const Vector& x, double tol) const {
  if (x.size() != size()) return false;
  if ((x.array() < lo - tol).any() || (x.array() > hi + tol).any()) return false;
  return std::abs(equality.dot(x) - rhs) <= tol * std::max(1.0, static_cast<double>(size()));
}

Vector project_onto_feasible(const Vector& alpha_hat, const FeasibleBox& box) {
  box.validate();
  const Eigen::Index n = box.size();
  if (alpha_hat.size() != n) {
    throw ValidationError("point has length " + std::to_string(alpha_hat.size()) +
                          " but the feasible set has " + std::to_string(n) + " coordinates");
  }
  if (!alpha_hat.allFinite()) throw ValidationError("point must be finite");

  const auto clamp_at = [&](double nu) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = std::clamp(alpha_hat[i] + nu * box.equality[i], box.lo, box.hi);
    }
    return x;
  };
  const auto phi = [&](double nu) { return box.equality.dot(clamp_at(nu)); };

  // Feasible points are their own projection; return them untouched so the
  // map is exactly idempotent. The equality margin covers the summation
  // roundoff a projected output can carry.
  const double feas_scale =
      std::max({1.0, std::abs(box.lo), std::abs(box.hi), std::abs(box.rhs)});
  const double eq_slop = 64.0 * std::numeric_limits<double>::epsilon() *
                         static_cast<double>(n) * feas_scale;
  if ((alpha_hat.array() >= box.lo).all() && (alpha_hat.array() <= box.hi).all() &&
      std::abs(box.equality.dot(alpha_hat) - box.rhs) <= eq_slop) {
    return alpha_hat;
  }

  // nu -> phi(nu) is piecewise linear and nondecreasing. Each coordinate
  // contributes slope 1 between the multiplier values where it starts and
  // stops sliding; collect those 2n breakpoints.
  std::vector<double> points;
  points.reserve(2 * static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (box.equality[i] > 0.0) {
      points.push_back(box.lo - alpha_hat[i]);
      points.push_back(box.hi - alpha_hat[i]);
    } else {
      points.push_back(alpha_hat[i] - box.hi);
      points.push_back(alpha_hat[i] - box.lo);
    }
  }
  std::sort(points.begin(), points.end());

  double nu = 0.0;
  if (phi(points.front()) >= box.rhs) {
    nu = points.front();  // rhs at (or numerically below) the smallest reachable level
  } else if (phi(points.back()) <= box.rhs) {
    nu = points.back();
  } else {
    // Smallest breakpoint whose level reaches rhs, then interpolate on the
    // linear segment below it.
    std::size_t lo_i = 0;
    std::size_t hi_i = points.size() - 1;
    while (hi_i - lo_i > 1) {
      const std::size_t mid = (lo_i + hi_i) / 2;
      if (phi(points[mid]) >= box.rhs) {
        hi_i = mid;
      } else {
        lo_i = mid;
      }
    }
    const double p0 = points[lo_i];
    const double p1 = points[hi_i];
    const double f0 = phi(p0);
    const double f1 = phi(p1);
    if (p1 <= p0 || f1 <= f0) {
      nu = p1;
    } else {
      nu = p0 + (box.rhs - f0) * (p1 - p0) / (f1 - f0);
    }
  }
  return clamp_at(nu);
}

void LocalizationSet::append_row(const Vector& normal, double offset, bool is_original) {
  if (a.rows() == 0 && a.cols() == 0) a.resize(0, normal.size());
  if (normal.size() != a.cols()) {
    throw ValidationError("halfspace normal has length " + std::to_string(normal.size()) +
                          " but the set lives in " + std::to_string(a.cols()) + " dimensions");
  }
  if (!normal.allFinite() || !std::isfinite(offset)) {
    throw ValidationError("halfspace rows must be finite");
  }
  a.conservativeResize(a.rows() + 1, Eigen::NoChange);
  a.row(a.rows() - 1) = normal.transpose();
  b.conservativeResize(b.size() + 1);
  b[b.size() - 1] = offset;
  original.push_back(is_original);
}

CenterResult analytic_center(const LocalizationSet& set, const Vector& start) {
  const Eigen::Index m = set.rows();
  const Eigen::Index n = set.a.cols();
  if (m == 0) throw ValidationError("localization set has no rows");
  if (static_cast<Eigen::Index>(set.original.size()) != m) {
    throw ValidationError("origin flags out of sync with rows");
  }
  if (start.size() != n || !start.allFinite()) {
    throw ValidationError("start point must be finite with length " + std::to_string(n));
  }
  const bool has_eq = set.equality.size() > 0;
  if (has_eq && set.equality.size() != n) {
    throw ValidationError("affine restriction dimension mismatch");
  }

  Vector x = start;
  {
    const Vector s = set.slack(x);
    if ((s.array() <= 0.0).any()) {
      throw ValidationError("start is not strictly feasible for the localization set");
    }
    if (has_eq &&
        std::abs(set.equality.dot(x) - set.eq_rhs) >
            1e-6 * std::max(1.0, static_cast<double>(n))) {
      throw ValidationError("start violates the affine restriction");
    }
  }

  Matrix hess(n, n);
  const int kMaxNewton = 200;
  bool converged = false;
  for (int it = 0; it < kMaxNewton; ++it) {
    const Vector s = set.slack(x);
    const Vector inv_s = s.cwiseInverse();
    const Vector grad = set.a.transpose() * inv_s;
    hess = set.a.transpose() * inv_s.array().square().matrix().asDiagonal() * set.a;

    Vector dx(n);
    if (has_eq) {
      Matrix kkt = Matrix::Zero(n + 1, n + 1);
      kkt.topLeftCorner(n, n) = hess;
      kkt.block(0, n, n, 1) = set.equality;
      kkt.block(n, 0, 1, n) = set.equality.transpose();
      Vector rhs = Vector::Zero(n + 1);
      rhs.head(n) = -grad;
      const Eigen::FullPivLU<Matrix> lu(kkt);
      const Vector sol = lu.solve(rhs);
      if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) {
        throw ConvergenceError("barrier system is singular; the set is degenerate");
      }
      dx = sol.head(n);
      // The bordered solve leaves an equality residual proportional to the
      // conditioning of the barrier Hessian; squash it so centers never
      // drift off the affine restriction.
      dx -= set.equality * (set.equality.dot(dx) / set.equality.squaredNorm());
    } else {
      const Eigen::LDLT<Matrix> ldlt(hess);
      dx = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !dx.allFinite() ||
          (hess * dx + grad).norm() > 1e-6 * (1.0 + grad.norm())) {
        throw ConvergenceError("barrier Hessian is singular; the set is degenerate or unbounded");
      }
    }

    const double decrement_sq = dx.dot(hess * dx);
    if (!std::isfinite(decrement_sq) || decrement_sq < 0.0) {
      throw ConvergenceError("barrier Hessian lost positive definiteness");
    }
    const double decrement = std::sqrt(decrement_sq);

    Vector grad_proj = grad;
    if (has_eq) {
      grad_proj -= set.equality * (set.equality.dot(grad) / set.equality.squaredNorm());
    }
    // The Newton decrement certifies a nearby minimizer; the gradient alone
    // also vanishes along recession directions of an unbounded set, so both
    // are required.
    if ((grad_proj.norm() <= 1e-8 && decrement <= 1e-4) || decrement <= 1e-12) {
      converged = true;
      break;
    }

    double t = decrement > 0.25 ? 1.0 / (1.0 + decrement) : 1.0;
    Vector xn = x + t * dx;
    while ((set.slack(xn).array() <= 0.0).any()) {
      t *= 0.5;
      if (t < 1e-16) {
        throw ConvergenceError("centering step could not stay strictly feasible");
      }
      xn = x + t * dx;
    }
    x = xn;
  }
  if (!converged) {
    throw ConvergenceError(
        "analytic centering did not converge; the set is unbounded or degenerate");
  }

  CenterResult out;
  out.center = x;
  out.hessian = SymmetricMatrix(hess);
  return out;
}

namespace {

// max g'd over { d'Hd <= rows^2, equality'd = 0 }, added to the center value:
// the row-count-inflated Dikin ellipsoid around the analytic center covers
// the polytope, so this dominates the maximum of any function lying below its
// tangent plane at the center.
double ellipsoid_upper(double f_center, const Vector& grad, const Matrix& hess,
                       const Vector& equality, Eigen::Index rows) {
  const Eigen::LDLT<Matrix> ldlt(hess);
  Vector r = grad;
  Vector hinv_r;
  if (equality.size() > 0) {
    const Vector hinv_a = ldlt.solve(equality);
    const Vector hinv_g = ldlt.solve(grad);
    const double denom = equality.dot(hinv_a);
    const double nu = denom > 0.0 ? equality.dot(hinv_g) / denom : 0.0;
    r = grad - nu * equality;
    hinv_r = hinv_g - nu * hinv_a;
  } else {
    hinv_r = ldlt.solve(grad);
  }
  const double quad = std::max(0.0, r.dot(hinv_r));
  return f_center + static_cast<double>(rows) * std::sqrt(quad);
}

// Strictly interior feasible point, or the closest the variant admits (the
// caller detects boundary starts and degrades gracefully).
Vector interior_start(const TrainingProblem& problem, const FeasibleBox& box) {
  const Eigen::Index n = problem.size();
  switch (problem.variant) {
    case Variant::kClassification:
    case Variant::kPerturb:
    case Variant::kWeighted: {
      double n_pos = 0.0;
      double n_neg = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) (problem.y[i] > 0.0 ? n_pos : n_neg) += 1.0;
      if (n_pos == 0.0 || n_neg == 0.0) return Vector::Zero(n);
      const double t_pos = 0.5 * problem.c * std::min(1.0, n_neg / n_pos);
      const double t_neg = 0.5 * problem.c * std::min(1.0, n_pos / n_neg);
      Vector x(n);
      for (Eigen::Index i = 0; i < n; ++i) x[i] = problem.y[i] > 0.0 ? t_pos : t_neg;
      return x;
    }
    case Variant::kSvr:
      return Vector::Zero(n);
    case Variant::kOneClass:
      return Vector::Constant(n, 1.0 / static_cast<double>(n));
  }
  return Vector::Zero(n);
}

void fill_model_from_solution(TrainedModel& model, const Objective& objective,
                              const Vector& alpha, double value) {
  const ProxyKernel proxy = objective.proxy_at(alpha);
  model.alpha = alpha;
  model.rho = proxy.rho;
  model.update_vector = proxy.update_vector;
  model.projected = proxy.projected;
  model.objective = value;
  model.bias = recover_bias(objective.problem(), proxy.materialized, alpha);
}

void check_common_cfg(double gap_tol, int max_iter) {
  if (!(gap_tol > 0.0) || !std::isfinite(gap_tol)) {
    throw ValidationError("gap tolerance must be positive and finite");
  }
  if (max_iter < 1) throw ValidationError("iteration budget must be positive");
}

}  // namespace

TrainedModel projected_gradient_solve(const TrainingProblem& problem, const PgConfig& cfg) {
  check_common_cfg(cfg.gap_tol, cfg.max_iter);
  if (cfg.gap_every < 1) throw ValidationError("gap cadence must be positive");
  if (cfg.step_scale < 0.0 || !std::isfinite(cfg.step_scale)) {
    throw ValidationError("step scale must be nonnegative and finite");
  }
  const auto t0 = Clock::now();
  const Eigen::Index n = problem.size();
  const SmoothingConfig smoothing =
      cfg.smoothing ? *cfg.smoothing : SmoothingConfig::for_kernel(problem.k0);
  const Objective objective(problem, smoothing);
  const FeasibleBox box = FeasibleBox::from_problem(problem);
  const double step_scale =
      cfg.step_scale > 0.0 ? cfg.step_scale : (problem.variant == Variant::kPerturb ? 10.0 : 5.0);

  Vector alpha = project_onto_feasible(Vector::Constant(n, 0.5 * problem.box_hi()), box);

  TrainedModel model;
  model.variant = problem.variant;
  model.labels = problem.y;
  model.penalty_c = problem.c;

  double best_value = -kInf;
  Vector best_alpha = alpha;
  double upper_running = kInf;
  bool converged = false;

  const auto gap_check = [&](int iteration, const Vector& a) {
    const GapBound gb = gap_bound(objective, a, cfg.qp);
    const double value = gb.upper - gb.gap;  // unsmoothed objective at a
    if (value > best_value) {
      best_value = value;
      best_alpha = a;
    }
    upper_running = std::min(upper_running, gb.upper);
    model.trace.rows.push_back({iteration, value, gb.upper, gb.gap, seconds_since(t0)});
    return upper_running - best_value <= cfg.gap_tol;
  };

  for (int k = 1; k <= cfg.max_iter && !converged; ++k) {
    const ObjectiveEval eval = objective.evaluate(alpha);
    alpha = project_onto_feasible(alpha + (step_scale / k) * eval.gradient, box);
    if (k % cfg.gap_every == 0 || k == cfg.max_iter) converged = gap_check(k, alpha);
  }

  model.status = converged ? SolverStatus::kConverged : SolverStatus::kIterationLimit;
  model.gap = upper_running - best_value;
  fill_model_from_solution(model, objective, best_alpha, best_value);
  return model;
}

void prune_localization(LocalizationSet& set, const SymmetricMatrix& hessian,
                        const Vector& center, Eigen::Index max_rows) {
  if (set.rows() <= max_rows) return;
  const Eigen::LDLT<Matrix> ldlt(hessian.m());
  const Vector s = set.slack(center);

  struct Cut {
    Eigen::Index row;
    double relevance;
  };
  std::vector<Cut> cuts;
  Eigen::Index original_count = 0;
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (set.original[j]) {
      ++original_count;
      continue;
    }
    const Vector aj = set.a.row(j).transpose();
    const double quad = aj.dot(ldlt.solve(aj));
    const double sj = std::max(s[j], 0.0);
    const double rel = sj > 0.0 ? quad / (sj * sj) : kInf;
    cuts.push_back({j, rel});
  }
  const Eigen::Index keep =
      std::max<Eigen::Index>(0, max_rows - original_count);
  if (static_cast<Eigen::Index>(cuts.size()) <= keep) return;
  // Most relevant first; stable so earlier cuts win ties deterministically.
  std::stable_sort(cuts.begin(), cuts.end(),
                   [](const Cut& l, const Cut& r) { return l.relevance > r.relevance; });

  std::vector<bool> keep_row(static_cast<std::size_t>(set.rows()), false);
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (set.original[j]) keep_row[static_cast<std::size_t>(j)] = true;
  }
  for (Eigen::Index c = 0; c < keep; ++c) {
    keep_row[static_cast<std::size_t>(cuts[static_cast<std::size_t>(c)].row)] = true;
  }

  LocalizationSet next;
  next.a.resize(0, set.a.cols());
  next.equality = set.equality;
  next.eq_rhs = set.eq_rhs;
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (keep_row[static_cast<std::size_t>(j)]) {
      next.append_row(set.a.row(j).transpose(), set.b[j], set.original[j]);
    }
  }
  set = std::move(next);
}

namespace {

// Move x off the newest cut (which passes through or beyond it) to a strictly
// interior point, along the projected objective gradient — the side the cut
// keeps. Returns false when no interior point is found along that ray.
bool step_off_cut(const LocalizationSet& set, Vector& x, const Vector& grad) {
  Vector d = grad;
  if (set.equality.size() > 0) {
    d -= set.equality * (set.equality.dot(d) / set.equality.squaredNorm());
  }
  const double dn = d.norm();
  if (dn <= 1e-300) return false;
  d /= dn;

  const Vector s = set.slack(x);
  const Vector ad = set.a * d;
  double t_max = kInf;
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (ad[j] > 0.0) t_max = std::min(t_max, s[j] / ad[j]);
  }
  if (!std::isfinite(t_max)) t_max = 1.0;

  double t = 0.5 * t_max;
  while (t >= 1e-14) {
    const Vector candidate = x + t * d;
    if ((set.slack(candidate).array() > 0.0).all()) {
      x = candidate;
      return true;
    }
    t *= 0.5;
  }
  return false;
}

}  // namespace

TrainedModel accpm_solve(const TrainingProblem& problem, const AccpmConfig& cfg) {
  const Eigen::Index n = problem.size();
  const int max_iter = cfg.max_iter > 0 ? cfg.max_iter : static_cast<int>(5 * n);
  check_common_cfg(cfg.gap_tol, max_iter);
  if (cfg.max_rows_factor < 1) throw ValidationError("row budget factor must be positive");

  const auto t0 = Clock::now();
  const SmoothingConfig smoothing =
      cfg.smoothing ? *cfg.smoothing : SmoothingConfig::for_kernel(problem.k0);
  const Objective objective(problem, smoothing);
  const FeasibleBox box = FeasibleBox::from_problem(problem);

  TrainedModel model;
  model.variant = problem.variant;
  model.labels = problem.y;
  model.penalty_c = problem.c;

  // Problem faces; the equality is held exactly by the centering step.
  LocalizationSet set;
  set.a.resize(0, n);
  set.equality = box.equality;
  set.eq_rhs = box.rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e[i] = 1.0;
    set.append_row(e, box.hi, true);
    e[i] = -1.0;
    set.append_row(e, -box.lo, true);
  }

  Vector x = project_onto_feasible(interior_start(problem, box), box);
  const double edge = 1e-12 * std::max(1.0, std::abs(box.hi) + std::abs(box.lo));
  if (x.minCoeff() <= box.lo + edge || x.maxCoeff() >= box.hi - edge) {
    // The feasible set has no usable interior (e.g. a single feasible point);
    // certify the start point and return it.
    const GapBound gb = gap_bound(objective, x, cfg.qp);
    const double value = gb.upper - gb.gap;
    model.trace.rows.push_back({0, value, gb.upper, gb.gap, seconds_since(t0)});
    model.status =
        gb.gap <= cfg.gap_tol ? SolverStatus::kConverged : SolverStatus::kIterationLimit;
    model.gap = gb.gap;
    fill_model_from_solution(model, objective, x, value);
    return model;
  }

  // Two incumbents with different jobs. The center incumbent is the best
  // analytic center: strictly interior and clearing every cut by the cut
  // margin, so it can always restart the centering. The overall incumbent is
  // the best feasible point seen anywhere (centers or fixed-kernel dual
  // solutions, which may sit on box faces) and drives the certificates.
  double best_center_smoothed = -kInf;
  Vector best_center_alpha = x;
  double best_value = -kInf;
  Vector best_alpha = x;
  double upper_running = kInf;
  bool converged = false;

  for (int iter = 1; iter <= max_iter; ++iter) {
    CenterResult center;
    bool centered = false;
    for (int attempt = 0; attempt < 2 && !centered; ++attempt) {
      try {
        center = analytic_center(set, attempt == 0 ? x : best_center_alpha);
        centered = true;
      } catch (const ValidationError&) {
      } catch (const ConvergenceError&) {
      }
    }
    if (!centered) break;  // no interior left; the final certificate decides
    x = center.center;

    const ObjectiveEval eval = objective.evaluate(x);
    const double fx = objective.direct_value(x);
    if (eval.value > best_center_smoothed) {
      best_center_smoothed = eval.value;
      best_center_alpha = x;
    }
    if (fx > best_value) {
      best_value = fx;
      best_alpha = x;
    }

    // The smoothed objective dominates the unsmoothed one pointwise (its
    // spectral clamp is a feasible, suboptimal choice of the inner
    // minimization), so a bound on its maximum certifies the real objective.
    const double upper =
        ellipsoid_upper(eval.value, eval.gradient, center.hessian.m(), set.equality, set.rows());
    upper_running = std::min(upper_running, upper);
    // The ellipsoid bound tightens slowly; a fixed-kernel dual bound at the
    // incumbent is cheap enough to fold in periodically — and the dual's own
    // maximizer is a free candidate that homes in on the saddle point.
    if (iter % 10 == 0 || upper_running - best_value <= 10.0 * cfg.gap_tol) {
      QpSolution dual;
      upper_running =
          std::min(upper_running, gap_bound(objective, best_alpha, cfg.qp, &dual).upper);
      const double fd = objective.direct_value(dual.alpha);
      if (fd > best_value) {
        best_value = fd;
        best_alpha = dual.alpha;
      }
    }
    const double gap = upper_running - best_value;
    model.trace.rows.push_back({iter, fx, upper_running, gap, seconds_since(t0)});
    if (gap <= cfg.gap_tol) {
      converged = true;
      break;
    }

    const double grad_scale = eval.gradient.cwiseAbs().maxCoeff();
    if (grad_scale <= 1e-14) {
      break;  // at the unconstrained maximum; the final certificate decides
    }
    // Deep cut: the smoothed maximizer scores at least the center incumbent,
    // so the supergradient halfspace can be shifted past the center by that
    // incumbent's lead. The margin keeps the retained interior nonempty —
    // the center incumbent clears every cut by at least this much (the
    // supergradient inequality bounds its slack from below by the margin).
    const double margin = 0.1 * cfg.gap_tol;
    const double shift = best_center_smoothed - eval.value - margin;
    set.append_row(-eval.gradient, -eval.gradient.dot(x) - shift, false);
    // Box faces are exempt from the budget: only added cuts are counted.
    prune_localization(set, center.hessian, x,
                       2 * n + static_cast<Eigen::Index>(cfg.max_rows_factor) * n);
    // A deep cut can leave the current center outside the set; restart the
    // next centering from the center incumbent when the ray finds no room.
    if (!step_off_cut(set, x, eval.gradient)) x = best_center_alpha;
  }

  // Final certificate: combine the ellipsoid bound with a fixed-kernel dual
  // bound at the best iterate.
  const GapBound gb = gap_bound(objective, best_alpha, cfg.qp);
  upper_running = std::min(upper_running, gb.upper);
  if (best_value == -kInf) best_value = gb.upper - gb.gap;
  model.gap = upper_running - best_value;
  model.status = (converged || model.gap <= cfg.gap_tol) ? SolverStatus::kConverged
                                                         : SolverStatus::kIterationLimit;
  fill_model_from_solution(model, objective, best_alpha, best_value);
  return model;
}

namespace {

struct MasterKernel {
  SymmetricMatrix kernel;
  Matrix quad;      // labels-conjugated kernel, the quadratic form on alpha
  double constant;  // penalty paid for this kernel's deviation from the base
  double bound;     // exact box-constrained maximum of its quadratic, plus constant
  int idle = 0;     // consecutive outer iterations spent slack
};

double master_value(const std::vector<MasterKernel>& kernels, const Vector& alpha,
                    Eigen::Index* argmin) {
  double worst = kInf;
  for (std::size_t j = 0; j < kernels.size(); ++j) {
    const double v =
        alpha.sum() - 0.5 * alpha.dot(kernels[j].quad * alpha) + kernels[j].constant;
    if (v < worst) {
      worst = v;
      if (argmin) *argmin = static_cast<Eigen::Index>(j);
    }
  }
  return worst;
}

// Projected subgradient ascent on the concave piecewise-quadratic master.
// The step length targets best-so-far plus a headroom that starts at the
// certified slack to `target` and halves whenever progress stalls, so the
// iteration first moves in long strides and then refines.
Vector solve_master(const std::vector<MasterKernel>& kernels, const FeasibleBox& box,
                    Vector alpha, double target, const ExchangeConfig& cfg,
                    double* value_out) {
  Vector best_alpha = alpha;
  Eigen::Index arg = 0;
  double best_val = master_value(kernels, alpha, &arg);
  // Level scheme: aim each step at best-so-far plus a gap estimate `delta`,
  // halving delta whenever a stretch of steps fails to recover a fixed
  // fraction of it.  Counting only such significant gains (rather than any
  // epsilon-size uptick) is what forces delta down to the true residual gap.
  double delta = std::max(target - best_val, 1e-6 * (1.0 + std::abs(best_val)));
  long stale = 0;
  for (long it = 0; it < cfg.master_max_iter; ++it) {
    const double val = master_value(kernels, alpha, &arg);
    if (val > best_val) {
      if (val > best_val + 0.25 * delta) stale = 0;
      best_val = val;
      best_alpha = alpha;
    }
    if (++stale > 50) {
      delta *= 0.5;
      stale = 0;
      if (delta <= 1e-9 * (1.0 + std::abs(best_val))) break;
    }
    const Vector grad = Vector::Ones(alpha.size()) - kernels[arg].quad * alpha;
    const double gn2 = grad.squaredNorm();
    if (gn2 <= 1e-24) break;
    const double room = std::max(std::min(best_val + delta, target) - val, 0.0);
    alpha = project_onto_feasible(alpha + (room / gn2) * grad, box);
  }
  if (value_out) *value_out = best_val;
  return best_alpha;
}

}  // namespace

TrainedModel exchange_solve(const TrainingProblem& problem, const ExchangeConfig& cfg) {
  if (problem.variant != Variant::kClassification) {
    throw ValidationError("the kernel-exchange solver supports the two-class variant only");
  }
  check_common_cfg(cfg.gap_tol, cfg.max_iter);
  if (cfg.master_max_iter < 1) throw ValidationError("master iteration budget must be positive");
  if (cfg.prune_after < 1) throw ValidationError("prune window must be positive");

  const auto t0 = Clock::now();
  const Eigen::Index n = problem.size();
  const Objective objective(problem, SmoothingConfig::for_kernel(problem.k0));
  const FeasibleBox box = FeasibleBox::from_problem(problem);
  const Matrix label_outer = problem.y * problem.y.transpose();

  TrainedModel model;
  model.variant = problem.variant;
  model.labels = problem.y;
  model.penalty_c = problem.c;

  std::vector<MasterKernel> kernels;
  double upper = kInf;
  QpConfig inner = cfg.qp;
  inner.tol = std::min(inner.tol, 1e-8);
  Vector alpha;

  const auto commit_kernel = [&](const SymmetricMatrix& k) -> QpSolution {
    MasterKernel mk;
    mk.kernel = k;
    mk.quad = k.m().cwiseProduct(label_outer);
    mk.constant = problem.rho * (k.m() - problem.k0.m()).squaredNorm();
    const QpSolution sol = solve_svm_dual(k, problem.y, problem.c, inner);
    mk.bound = sol.objective + mk.constant;
    upper = std::min(upper, mk.bound);  // min over per-kernel maxima dominates the max-min
    kernels.push_back(std::move(mk));
    return sol;
  };

  // First candidate: the clamped base kernel; its exact dual solution is the
  // first master solution.
  alpha = commit_kernel(psd_part(problem.k0)).alpha;

  double best_value = -kInf;
  Vector best_alpha = alpha;
  bool converged = false;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    // The learned kernel at alpha realizes the unrestricted inner minimum, so
    // the objective there is exactly the value its new constraint would take.
    const double value = objective.direct_value(alpha);
    if (value > best_value) {
      best_value = value;
      best_alpha = alpha;
    }
    const double gap = upper - best_value;
    model.trace.rows.push_back({iter, value, upper, gap, seconds_since(t0)});
    if (gap <= cfg.gap_tol) {
      converged = true;
      break;
    }

    const QpSolution newest = commit_kernel(objective.proxy_at(alpha).materialized);

    // The newest kernel's exact maximizer is a feasible iterate in its own
    // right; let the best-value tracking see it.
    const double newest_value = objective.direct_value(newest.alpha);
    if (newest_value > best_value) {
      best_value = newest_value;
      best_alpha = newest.alpha;
    }

    // It is also usually nearly master-optimal once the kernels stop moving;
    // keep whichever candidate the master ranks higher.
    Vector warm = alpha;
    const double newest_master = master_value(kernels, newest.alpha, nullptr);
    if (newest_master > master_value(kernels, warm, nullptr)) warm = newest.alpha;
    double reached = 0.0;
    Vector polished = solve_master(kernels, box, warm, upper, cfg, &reached);
    alpha = (newest_master > reached) ? newest.alpha : polished;

    // Retire kernels whose constraint has been slack for a while.
    Eigen::Index active = 0;
    const double floor_val = master_value(kernels, alpha, &active);
    for (std::size_t j = 0; j < kernels.size(); ++j) {
      const double v =
          alpha.sum() - 0.5 * alpha.dot(kernels[j].quad * alpha) + kernels[j].constant;
      if (v - floor_val > cfg.prune_slack) {
        ++kernels[j].idle;
      } else {
        kernels[j].idle = 0;
      }
    }
    kernels.erase(std::remove_if(kernels.begin(), kernels.end(),
                                 [&](const MasterKernel& mk) {
                                   return mk.idle >= cfg.prune_after;
                                 }),
                  kernels.end());
  }

  model.gap = upper - best_value;
  model.status = (converged || model.gap <= cfg.gap_tol) ? SolverStatus::kConverged
                                                         : SolverStatus::kIterationLimit;
  fill_model_from_solution(model, objective, best_alpha, best_value);
  return model;
}

}  // namespace iksvm
