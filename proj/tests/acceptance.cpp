// Acceptance gate: one self-contained check per shipped guarantee, each
// printed as a single PASS/FAIL line. The binary exits nonzero when any
// gating check fails. The final check needs a user-supplied USPS data drop
// and reports SKIP when the files are absent; it never gates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "iksvm/bench.hpp"
#include "iksvm/kernels.hpp"
#include "iksvm/objective.hpp"
#include "iksvm/proxy.hpp"
#include "iksvm/refqp.hpp"
#include "iksvm/solvers.hpp"
#include "iksvm/symlin.hpp"
#include "iksvm/types.hpp"
#include "oracles.hpp"

using namespace iksvm;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

// Appends a formatted failure note; keeps only the first few so the line
// stays readable when many cases trip.
class FailLog {
 public:
  explicit FailLog(std::string& out) : out_(out) {}

  void add(const char* message) {
    ++count_;
    if (count_ > 3) return;
    if (!out_.empty()) out_ += "; ";
    out_ += message;
  }

  template <typename... Args>
  void add(const char* fmt, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    add(buf);
  }

  bool clean() const { return count_ == 0; }
  void summarize() {
    if (count_ > 3) out_ += "; (+" + std::to_string(count_ - 3) + " more)";
  }

 private:
  std::string& out_;
  int count_ = 0;
};

Vector interior_box_point(oracles::Rng& rng, const TrainingProblem& p, double margin) {
  const Vector lo = Vector::Constant(p.size(), p.box_lo() + margin);
  const Vector hi = Vector::Constant(p.size(), p.box_hi() - margin);
  return oracles::random_box_point(rng, lo, hi);
}

LabeledDataset make_blobs(oracles::Rng& rng, Eigen::Index n_pos, Eigen::Index n_neg,
                          Eigen::Index dim, double sep, double jitter) {
  std::uniform_real_distribution<double> noise(-jitter, jitter);
  Matrix x(n_pos + n_neg, dim);
  Vector y(n_pos + n_neg);
  for (Eigen::Index i = 0; i < n_pos + n_neg; ++i) {
    const double center = i < n_pos ? sep : -sep;
    y[i] = i < n_pos ? 1.0 : -1.0;
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = center + noise(rng);
  }
  return make_dataset(x, y);
}

// Penalized kernel subproblem value with a flat deviation charge.
double inner_value(const Matrix& k, const Matrix& k0, const Vector& u, double rho) {
  return -0.5 * u.dot(k * u) + rho * (k - k0).squaredNorm();
}

// Componentwise variant: entry (i, j) deviation charged h_i * h_j.
double inner_value_weighted(const Matrix& k, const Matrix& k0, const Vector& u,
                            const Vector& h) {
  const Matrix d = k - k0;
  return -0.5 * u.dot(k * u) + (h * h.transpose()).cwiseProduct(d.cwiseProduct(d)).sum();
}

TrainedModel fixed_kernel_model(const QpSolution& qp, const Vector& labels, double c) {
  TrainedModel model;
  model.variant = Variant::kClassification;
  model.alpha = qp.alpha;
  model.labels = labels;
  model.penalty_c = c;
  model.rho = 0.0;
  model.update_vector = Vector::Zero(qp.alpha.size());
  model.projected = false;
  model.bias = qp.bias;
  model.objective = qp.objective;
  return model;
}

std::vector<Eigen::Index> index_range(Eigen::Index begin, Eigen::Index end) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = begin; i < end; ++i) idx.push_back(i);
  return idx;
}

bool same_labels(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

int label_mismatches(const Vector& a, const Vector& b) {
  int diff = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return diff;
}

// --------------------------------------------------------------------------
// 1. The closed-form learned kernel attains the penalized-subproblem optimum.
// --------------------------------------------------------------------------
bool check_proxy_optimality(std::string& why) {
  oracles::Rng rng(101);
  FailLog log(why);
  const double rhos[] = {0.1, 1.0, 10.0};
  const double t0 = now_seconds();
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial % 16;
    const double rho = rhos[trial % 3];
    const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const Vector alpha = oracles::random_feasible_alpha(rng, y, 1.0);
    const Vector u = y.cwiseProduct(alpha);

    const ProxyKernel px = proxy_classification(k0, alpha, y, rho);
    const Matrix oracle = oracles::psd_cone_minimizer(k0.m(), u, rho);
    const double closed = inner_value(px.materialized.m(), k0.m(), u, rho);
    const double reference = inner_value(oracle, k0.m(), u, rho);
    const double dist = (px.materialized.m() - oracle).norm();
    if (closed > reference + 1e-5)
      log.add("trial %d: value %.3e above oracle %.3e", trial, closed, reference);
    if (dist > 1e-4) log.add("trial %d: distance to oracle %.3e", trial, dist);
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed > 60.0) log.add("runtime %.1fs exceeds 60s", elapsed);
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 2. Same guarantee for per-point deviation weights; uniform weights
//    reproduce the flat-penalty path exactly.
// --------------------------------------------------------------------------
bool check_weighted_proxy(std::string& why) {
  oracles::Rng rng(102);
  FailLog log(why);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial % 16;
    const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const Vector alpha = oracles::random_feasible_alpha(rng, y, 1.0);
    const Vector u = y.cwiseProduct(alpha);
    Vector h(n);
    for (int i = 0; i < n; ++i) h[i] = weight(rng);

    const ProxyKernel px = proxy_weighted(k0, alpha, y, PenaltyWeights{h});
    const Matrix oracle = oracles::weighted_psd_cone_minimizer(k0.m(), u, h);
    const double closed = inner_value_weighted(px.materialized.m(), k0.m(), u, h);
    const double reference = inner_value_weighted(oracle, k0.m(), u, h);
    const double dist = (px.materialized.m() - oracle).norm();
    if (closed > reference + 1e-5)
      log.add("trial %d: value %.3e above oracle %.3e", trial, closed, reference);
    if (dist > 1e-4) log.add("trial %d: distance to oracle %.3e", trial, dist);
  }

  // Uniform weights h_i = sqrt(rho) charge every entry rho, so the weighted
  // path must reproduce the flat-penalty kernel to roundoff.
  const double rhos[] = {0.1, 1.0, 10.0};
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + trial;
    const double rho = rhos[trial % 3];
    const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const Vector alpha = oracles::random_feasible_alpha(rng, y, 1.0);
    const ProxyKernel flat = proxy_classification(k0, alpha, y, rho);
    const ProxyKernel uni =
        proxy_weighted(k0, alpha, y, PenaltyWeights{Vector::Constant(n, std::sqrt(rho))});
    const double dev =
        (flat.materialized.m() - uni.materialized.m()).cwiseAbs().maxCoeff();
    if (dev > 1e-10) log.add("uniform trial %d: entry deviation %.3e", trial, dev);
  }
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 3. Rank-one eigendecomposition updates match a full re-decomposition.
// --------------------------------------------------------------------------
bool check_rank_one_update(std::string& why) {
  oracles::Rng rng(103);
  FailLog log(why);
  const double rhos[] = {0.8, -0.6, 2.5, -1.7, 0.05};
  const int n = 50;
  const double t0 = now_seconds();
  for (int trial = 0; trial < 200; ++trial) {
    const SymmetricMatrix base = oracles::random_symmetric(rng, n);
    const Vector u = oracles::random_vector(rng, n);
    const double rho = rhos[trial % 5];

    const EigenSystem old_sys = eig(base);
    const EigenSystem upd = rank_one_update_eig(old_sys, u, rho);
    const Matrix target = base.m() + rho * u * u.transpose();
    const EigenSystem direct = eig(SymmetricMatrix(target));

    const double ev_err = (upd.values - direct.values).cwiseAbs().maxCoeff();
    if (ev_err > 1e-8) log.add("trial %d: eigenvalue error %.3e", trial, ev_err);

    const Matrix rebuilt =
        upd.vectors * upd.values.asDiagonal() * upd.vectors.transpose();
    const double rec_err = (rebuilt - target).cwiseAbs().maxCoeff();
    if (rec_err > 1e-7) log.add("trial %d: reconstruction error %.3e", trial, rec_err);

    // Interlacing: a positive rank-one bump moves each eigenvalue up but not
    // past its upward neighbor; a negative one mirrors this.
    for (int i = 0; i < n; ++i) {
      const double v = upd.values[i];
      if (rho > 0) {
        if (v < old_sys.values[i] - 1e-8 ||
            (i + 1 < n && v > old_sys.values[i + 1] + 1e-8)) {
          log.add("trial %d: interlacing breach at %d", trial, i);
          break;
        }
      } else {
        if (v > old_sys.values[i] + 1e-8 ||
            (i > 0 && v < old_sys.values[i - 1] - 1e-8)) {
          log.add("trial %d: interlacing breach at %d", trial, i);
          break;
        }
      }
    }

    const double trace_target = old_sys.values.sum() + rho * u.squaredNorm();
    const double trace_err = std::abs(upd.values.sum() - trace_target);
    if (trace_err > 1e-7 * (1.0 + std::abs(trace_target)))
      log.add("trial %d: trace drift %.3e", trial, trace_err);
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed > 60.0) log.add("runtime %.1fs exceeds 60s", elapsed);
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 4. Analytic gradients survive a central finite-difference audit.
// --------------------------------------------------------------------------
bool check_gradient_audit(std::string& why) {
  oracles::Rng rng(104);
  FailLog log(why);

  // Spectral variant: keep the updated spectrum away from zero and from
  // repeated eigenvalues so the finite-difference probes stay on one branch.
  const auto well_separated = [](const TrainingProblem& p, const Vector& u) {
    const Matrix x = p.k0.m() + u * u.transpose() / (4.0 * p.rho);
    const Vector ev = eig(SymmetricMatrix(x)).values;
    double min_gap = 1e9;
    for (int i = 0; i + 1 < ev.size(); ++i)
      min_gap = std::min(min_gap, ev[i + 1] - ev[i]);
    return ev.cwiseAbs().minCoeff() > 1e-3 && min_gap > 1e-3;
  };

  int accepted = 0;
  for (int attempt = 0; attempt < 600 && accepted < 30; ++attempt) {
    const int n = 6 + attempt % 7;
    const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const TrainingProblem p =
        TrainingProblem::classification(k0, y, 1.0, 1.0 + 0.2 * (attempt % 4));
    const Vector alpha = interior_box_point(rng, p, 0.05);
    if (!well_separated(p, y.cwiseProduct(alpha))) continue;
    ++accepted;
    const double err = check_gradient(p, alpha, SmoothingConfig(1e-7));
    if (err >= 1e-4) log.add("two-class case %d: rel error %.3e", accepted, err);
  }
  if (accepted < 30) log.add("only %d separated two-class cases found", accepted);

  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + trial % 7;
    const SymmetricMatrix psd(
        Matrix(oracles::random_psd(rng, n).m() + 0.1 * Matrix::Identity(n, n)));
    const Vector y = oracles::random_labels(rng, n);
    const TrainingProblem p =
        TrainingProblem::perturb(psd, y, 1.0, 0.7 + 0.15 * (trial % 4));
    const Vector alpha = interior_box_point(rng, p, 0.05);
    const double err = check_gradient(p, alpha, SmoothingConfig(1e-6));
    if (err >= 1e-6) log.add("perturbation case %d: rel error %.3e", trial, err);
  }
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 5. The eigen-expanded objective agrees with the direct quadratic form.
// --------------------------------------------------------------------------
bool check_direct_form(std::string& why) {
  oracles::Rng rng(105);
  FailLog log(why);
  const double rhos[] = {0.5, 1.0, 3.0};
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial % 12;
    const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const TrainingProblem p =
        TrainingProblem::classification(k0, y, 1.0, rhos[trial % 3]);
    const Vector alpha = interior_box_point(rng, p, 0.02);
    const Objective obj(p, SmoothingConfig(1e-10));
    const double expanded = obj.evaluate(alpha).value;
    const double direct = obj.direct_value(alpha);
    if (std::abs(expanded - direct) > 1e-6)
      log.add("trial %d: |%.9f - %.9f| = %.3e", trial, expanded, direct,
              std::abs(expanded - direct));
  }
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 6. The three training algorithms land on the same answer.
// --------------------------------------------------------------------------
bool check_solver_parity(std::string& why) {
  oracles::Rng rng(106);
  FailLog log(why);
  const KernelSpec spec = KernelSpec::parse("sigmoid:a=0.9,b=-0.3");
  const int train_sizes[] = {16, 20, 24, 28, 40};
  const double cs[] = {0.5, 1.0, 2.0};
  const double rhos[] = {1.0, 5.0, 20.0};

  for (int trial = 0; trial < 20; ++trial) {
    const int half = train_sizes[trial % 5] / 2;
    const LabeledDataset train = make_blobs(rng, half, half, 3, 1.1, 0.55);
    const LabeledDataset test = make_blobs(rng, 4, 4, 3, 1.1, 0.55);
    const SymmetricMatrix k_train = gram(train.features, spec);
    const Matrix k_cross = cross_gram(test.features, train.features, spec);
    const Matrix k_test = gram(test.features, spec).m();
    const TrainingProblem problem = TrainingProblem::classification(
        k_train, train.labels, cs[trial % 3], rhos[(trial / 3) % 3]);

    PgConfig pg_cfg;
    pg_cfg.gap_tol = 1e-3;
    pg_cfg.max_iter = 40000;
    AccpmConfig ac_cfg;
    ac_cfg.gap_tol = 1e-3;
    ExchangeConfig ex_cfg;
    ex_cfg.gap_tol = 1e-3;

    const TrainedModel pg = projected_gradient_solve(problem, pg_cfg);
    const TrainedModel ac = accpm_solve(problem, ac_cfg);
    const TrainedModel ex = exchange_solve(problem, ex_cfg);

    const auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-2 * (1.0 + std::max(std::abs(a), std::abs(b)));
    };
    if (!close(pg.objective, ac.objective) || !close(pg.objective, ex.objective) ||
        !close(ac.objective, ex.objective))
      log.add("trial %d: objectives %.6f / %.6f / %.6f", trial, pg.objective,
              ac.objective, ex.objective);

    const auto predictions = [&](const TrainedModel& m) {
      const SymmetricMatrix full = full_kernel_for_testing(k_train, k_cross, k_test, m);
      return predict(m, full, index_range(k_train.size(), full.size()));
    };
    const Vector ppg = predictions(pg);
    const Vector pac = predictions(ac);
    const Vector pex = predictions(ex);
    if (!same_labels(ppg, pac) || !same_labels(ppg, pex))
      log.add("trial %d: predictions differ", trial);

    for (size_t i = 1; i < ac.trace.rows.size(); ++i)
      if (ac.trace.rows[i].gap > ac.trace.rows[i - 1].gap + 1e-12) {
        log.add("trial %d: cutting-plane gap rose at row %zu", trial, i);
        break;
      }
    for (size_t i = 1; i < ex.trace.rows.size(); ++i)
      if (ex.trace.rows[i].upper_bound > ex.trace.rows[i - 1].upper_bound + 1e-12) {
        log.add("trial %d: exchange bound rose at row %zu", trial, i);
        break;
      }
  }
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 7. Large penalties collapse the learned kernel onto the clipped base, and
//    training at a huge penalty reproduces the denoise baseline.
// --------------------------------------------------------------------------
bool check_large_penalty_limit(std::string& why) {
  oracles::Rng rng(107);
  FailLog log(why);

  const int n = 30;
  const SymmetricMatrix k0 = oracles::random_indefinite(rng, n);
  const Vector y = oracles::random_labels(rng, n);
  const Vector alpha = oracles::random_feasible_alpha(rng, y, 1.0);
  const Matrix clipped = psd_part(k0).m();
  double prev = std::numeric_limits<double>::infinity();
  double final_dist = 0.0;
  for (int p = 1; p <= 6; ++p) {
    const double rho = std::pow(10.0, p);
    const ProxyKernel px = proxy_classification(k0, alpha, y, rho);
    const double dist = (px.materialized.m() - clipped).norm();
    if (dist > prev * (1.0 + 1e-12))
      log.add("distance rose at penalty 1e%d: %.3e > %.3e", p, dist, prev);
    prev = dist;
    final_dist = dist;
  }
  if (final_dist > 1e-4 * k0.m().norm())
    log.add("distance %.3e at penalty 1e6 exceeds %.3e", final_dist,
            1e-4 * k0.m().norm());

  // Trained comparison on a synthetic task: at penalty 1e6 the learned-kernel
  // machine and an SVM on the clipped kernel label every test point alike.
  const KernelSpec spec = KernelSpec::parse("sigmoid:a=0.9,b=-0.3");
  const LabeledDataset train = make_blobs(rng, 20, 20, 3, 1.2, 0.5);
  const LabeledDataset test = make_blobs(rng, 10, 10, 3, 1.2, 0.5);
  const SymmetricMatrix k_train = gram(train.features, spec);
  const Matrix k_cross = cross_gram(test.features, train.features, spec);
  const Matrix k_test = gram(test.features, spec).m();
  const double c = 1.0;

  PgConfig cfg;
  cfg.gap_tol = 1e-3;
  cfg.max_iter = 40000;
  const TrainedModel learned = projected_gradient_solve(
      TrainingProblem::classification(k_train, train.labels, c, 1e6), cfg);
  const SymmetricMatrix learned_full =
      assemble_test_kernel(Method::kIndefinitePg, k_train, k_cross, k_test, learned);

  const QpSolution qp =
      solve_svm_dual(spectral_transform(k_train, SpectralMode::kDenoise),
                     train.labels, c);
  const TrainedModel denoise = fixed_kernel_model(qp, train.labels, c);
  const SymmetricMatrix denoise_full =
      assemble_test_kernel(Method::kDenoise, k_train, k_cross, k_test, denoise);

  const std::vector<Eigen::Index> test_idx =
      index_range(k_train.size(), learned_full.size());
  const Vector p_learned = predict(learned, learned_full, test_idx);
  const Vector p_denoise = predict(denoise, denoise_full, test_idx);
  if (!same_labels(p_learned, p_denoise))
    log.add("predictions differ on %d of %d test points",
            label_mismatches(p_learned, p_denoise),
            static_cast<int>(p_learned.size()));
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 8. The rank-one perturbation variant degenerates to the plain dual as the
//    penalty explodes.
// --------------------------------------------------------------------------
bool check_perturbation_limit(std::string& why) {
  oracles::Rng rng(108);
  FailLog log(why);
  const int n = 18;
  const SymmetricMatrix k0(
      Matrix(oracles::random_psd(rng, n).m() + 0.4 * Matrix::Identity(n, n)));
  const Vector y = oracles::random_labels(rng, n);
  const double c = 1.2;

  PgConfig cfg;
  cfg.gap_tol = 1e-7;
  cfg.max_iter = 30000;
  const TrainedModel model =
      projected_gradient_solve(TrainingProblem::perturb(k0, y, c, 1e9), cfg);

  QpConfig tight;
  tight.tol = 1e-10;
  const QpSolution exact = solve_svm_dual(k0, y, c, tight);
  const double dev = (model.alpha - exact.alpha).lpNorm<Eigen::Infinity>();
  if (dev > 1e-3) log.add("coefficient deviation %.3e", dev);
  if (model.status != SolverStatus::kConverged) log.add("solver hit iteration limit");
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 9. Convergence envelope on a 100-point indefinite instance.
// --------------------------------------------------------------------------
bool check_convergence_envelope(std::string& why) {
  oracles::Rng rng(109);
  FailLog log(why);
  const int n = 100;
  const LabeledDataset data = make_blobs(rng, 50, 50, 4, 1.0, 0.9);
  const SymmetricMatrix k0 =
      gram(data.features, KernelSpec::parse("sigmoid:a=0.9,b=-0.3"));
  if (eig(k0).values.minCoeff() >= 0.0) log.add("instance kernel is not indefinite");
  const TrainingProblem problem = TrainingProblem::classification(k0, data.labels, 1.0, 1.0);

  double t0 = now_seconds();
  PgConfig pg_cfg;
  pg_cfg.gap_tol = 0.1;
  pg_cfg.max_iter = 2000;
  const TrainedModel pg = projected_gradient_solve(problem, pg_cfg);
  const double pg_secs = now_seconds() - t0;
  if (pg.status != SolverStatus::kConverged || pg.gap > 0.1)
    log.add("gradient solver gap %.3e after %zu evaluations", pg.gap,
            pg.trace.rows.size());
  if (pg_secs > 120.0) log.add("gradient solver took %.1fs", pg_secs);

  t0 = now_seconds();
  AccpmConfig ac_cfg;
  ac_cfg.gap_tol = 1e-3;
  const TrainedModel ac = accpm_solve(problem, ac_cfg);
  const double ac_secs = now_seconds() - t0;
  if (ac.status != SolverStatus::kConverged || ac.gap > 1e-3)
    log.add("cutting-plane gap %.3e", ac.gap);
  if (ac.trace.rows.size() > static_cast<size_t>(5 * n))
    log.add("cutting-plane used %zu iterations (budget %d)", ac.trace.rows.size(),
            5 * n);
  if (ac_secs > 120.0) log.add("cutting-plane took %.1fs", ac_secs);
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 10. Fixed-kernel duals match exhaustive oracles; the dual optimal value is
//     midpoint-convex in the kernel.
// --------------------------------------------------------------------------
bool check_reference_duals(std::string& why) {
  oracles::Rng rng(110);
  FailLog log(why);
  QpConfig tight;
  tight.tol = 1e-8;

  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8;
    const SymmetricMatrix k = oracles::random_psd(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const double c = trial % 2 == 0 ? 0.7 : 1.5;
    const QpSolution sol = solve_svm_dual(k, y, c, tight);
    const Matrix q = k.m().cwiseProduct(y * y.transpose());
    const oracles::BoxQpSolution ref = oracles::brute_force_box_qp(
        q, Vector::Constant(n, -1.0), y, 0.0, Vector::Constant(n, c));
    if (std::abs(sol.objective - (-ref.min_value)) > 1e-5)
      log.add("two-class %d: %.8f vs %.8f", trial, sol.objective, -ref.min_value);
  }

  for (int trial = 0; trial < 50; ++trial) {
    // The exhaustive oracle enumerates activity patterns, so the regression
    // dual is handed over in its split (positive/negative part) form; n = 5
    // keeps 2n within the oracle's reach.
    const int n = 5;
    const SymmetricMatrix k = oracles::random_psd(rng, n);
    const Vector t = oracles::random_vector(rng, n);
    const double c = trial % 2 == 0 ? 0.8 : 1.3;
    const double eps_tube = trial % 3 == 0 ? 0.05 : 0.3;
    const QpSolution sol = solve_svr_dual(k, t, c, eps_tube, tight);

    Matrix q(2 * n, 2 * n);
    q.topLeftCorner(n, n) = k.m();
    q.bottomRightCorner(n, n) = k.m();
    q.topRightCorner(n, n) = -k.m();
    q.bottomLeftCorner(n, n) = -k.m();
    Vector p(2 * n);
    p.head(n) = Vector::Constant(n, eps_tube) - t;
    p.tail(n) = Vector::Constant(n, eps_tube) + t;
    Vector sigma(2 * n);
    sigma.head(n).setOnes();
    sigma.tail(n).setConstant(-1.0);
    const oracles::BoxQpSolution ref =
        oracles::brute_force_box_qp(q, p, sigma, 0.0, Vector::Constant(2 * n, c));
    if (std::abs(sol.objective - (-ref.min_value)) > 1e-5)
      log.add("regression %d: %.8f vs %.8f", trial, sol.objective, -ref.min_value);
  }

  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8;
    const SymmetricMatrix k = oracles::random_psd(rng, n);
    const double nu = trial % 3 == 0 ? 0.3 : (trial % 3 == 1 ? 0.5 : 0.8);
    const QpSolution sol = solve_one_class_dual(k, nu, n, tight);
    const oracles::BoxQpSolution ref = oracles::brute_force_box_qp(
        k.m(), Vector::Zero(n), Vector::Ones(n), 1.0,
        Vector::Constant(n, 1.0 / (nu * n)));
    if (std::abs(sol.objective - (-ref.min_value)) > 1e-5)
      log.add("one-class %d: %.8f vs %.8f", trial, sol.objective, -ref.min_value);
  }

  // The dual optimum is a maximum of affine functions of the kernel, hence
  // convex in it: the midpoint kernel can never beat the average.
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10;
    const SymmetricMatrix k1 = oracles::random_psd(rng, n);
    const SymmetricMatrix k2 = oracles::random_psd(rng, n);
    const Vector y = oracles::random_labels(rng, n);
    const double c = 1.2;
    const double w1 = solve_svm_dual(k1, y, c, tight).objective;
    const double w2 = solve_svm_dual(k2, y, c, tight).objective;
    const double mid =
        solve_svm_dual(SymmetricMatrix(0.5 * (k1.m() + k2.m())), y, c, tight).objective;
    const double slack = 1e-7 * (1.0 + std::abs(w1) + std::abs(w2));
    if (mid > 0.5 * (w1 + w2) + slack)
      log.add("pair %d: midpoint %.8f above average %.8f", trial, mid,
              0.5 * (w1 + w2));
  }
  log.summarize();
  return log.clean();
}

// --------------------------------------------------------------------------
// 11. Optional directional experiment on user-supplied USPS digits.
// --------------------------------------------------------------------------
int check_usps_directional(std::string& why) {
  const std::string train_path = "data/usps-3-5.train";
  const std::string test_path = "data/usps-3-5.test";
  if (!std::filesystem::exists(train_path) || !std::filesystem::exists(test_path)) {
    why = "place svmlight files at data/usps-3-5.train and data/usps-3-5.test to run";
    return -1;
  }

  const LabeledDataset train = load_dataset(train_path, DatasetFormat::kSvmlight);
  const LabeledDataset test = load_dataset(test_path, DatasetFormat::kSvmlight);
  const Matrix train_bin = binarize(train.features, 0.5);
  const Matrix test_bin = binarize(test.features, 0.5);
  const KernelSpec spec = KernelSpec::parse("simpson");
  const SymmetricMatrix k_train = gram(train_bin, spec);
  const Matrix k_cross = cross_gram(test_bin, train_bin, spec);
  const Matrix k_test = gram(test_bin, spec).m();
  const double c = 10.0;

  PgConfig cfg;
  cfg.gap_tol = 1e-2;
  cfg.max_iter = 2000;
  const TrainedModel learned = projected_gradient_solve(
      TrainingProblem::classification(k_train, train.labels, c, 1.0), cfg);
  const SymmetricMatrix learned_full =
      assemble_test_kernel(Method::kIndefinitePg, k_train, k_cross, k_test, learned);

  const QpSolution qp = solve_svm_dual(
      spectral_transform(k_train, SpectralMode::kDenoise), train.labels, c);
  const TrainedModel denoise = fixed_kernel_model(qp, train.labels, c);
  const SymmetricMatrix denoise_full =
      assemble_test_kernel(Method::kDenoise, k_train, k_cross, k_test, denoise);

  const std::vector<Eigen::Index> idx = index_range(k_train.size(), learned_full.size());
  const Metrics m_learned =
      compute_metrics(predict(learned, learned_full, idx), test.labels);
  const Metrics m_denoise =
      compute_metrics(predict(denoise, denoise_full, idx), test.labels);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "learned average %.2f vs denoise %.2f",
                m_learned.average, m_denoise.average);
  why = buf;
  return m_learned.average >= m_denoise.average - 3.0 ? 1 : 0;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> gating = {
      {1, "learned kernel attains the penalized-subproblem optimum", check_proxy_optimality},
      {2, "weighted learned kernel matches its oracle; uniform weights collapse", check_weighted_proxy},
      {3, "rank-one eigen update matches full re-decomposition", check_rank_one_update},
      {4, "analytic gradients pass the finite-difference audit", check_gradient_audit},
      {5, "eigen-expanded objective equals the direct quadratic form", check_direct_form},
      {6, "gradient, cutting-plane, and exchange solvers agree", check_solver_parity},
      {7, "huge penalties reduce the learned kernel to the clipped base", check_large_penalty_limit},
      {8, "rank-one perturbation at huge penalty recovers the exact dual", check_perturbation_limit},
      {9, "convergence envelope holds on a 100-point instance", check_convergence_envelope},
      {10, "fixed-kernel duals match exhaustive oracles and stay midpoint-convex", check_reference_duals},
  };

  int failures = 0;
  for (const Criterion& c : gating) {
    std::string why;
    const double t0 = now_seconds();
    bool ok = false;
    try {
      ok = c.run(why);
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    const double secs = now_seconds() - t0;
    std::printf("%s %2d  %s  [%.1fs]%s%s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs,
                why.empty() ? "" : " -- ", why.c_str());
    std::fflush(stdout);
    failures += !ok;
  }

  {
    std::string why;
    const double t0 = now_seconds();
    int outcome = 0;
    try {
      outcome = check_usps_directional(why);
    } catch (const std::exception& e) {
      outcome = 0;
      why = std::string("exception: ") + e.what();
    }
    const double secs = now_seconds() - t0;
    const char* tag = outcome < 0 ? "SKIP" : (outcome > 0 ? "PASS" : "FAIL");
    std::printf("%s 11  directional experiment on user-supplied digit data  [%.1fs]%s%s\n",
                tag, secs, why.empty() ? "" : " -- ", why.c_str());
    // Informational only: requires external data and never gates the build.
  }

  if (failures > 0) {
    std::printf("%d of 10 gating checks failed\n", failures);
    return 1;
  }
  std::printf("all gating checks passed\n");
  return 0;
}
