#include "iksvm/symlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace iksvm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// One root of the secular equation, kept as (origin pole, offset) so that
// differences mu - delta_i can be formed without cancellation.
struct SecularRoot {
  int origin = 0;
  double tau = 0.0;
  double value(const std::vector<double>& delta) const { return delta[origin] + tau; }
};

// Find the k-th root of 1 + r * sum zeta2_i / (delta_i - lambda) = 0.
// delta is strictly ascending, zeta2 strictly positive, r > 0. Roots
// interlace: root k lies in (delta_k, delta_{k+1}), the last in
// (delta_{m-1}, delta_{m-1} + r). Each step replaces the pole sums on either
// side of the interval by single rational terms matched to their value and
// slope at the current iterate and solves that model exactly for the
// correction; a bracket maintained by sign keeps every step safe and the
// offset tau retains full relative accuracy even when the root hugs a pole.
SecularRoot solve_secular_root(const std::vector<double>& delta,
                               const std::vector<double>& zeta2, double r, int k) {
  const int m = static_cast<int>(delta.size());
  SecularRoot root;

  if (m == 1) {
    // 1 + r / (delta_0 - lambda) = 0  =>  lambda = delta_0 + r (zeta2_0 == 1).
    root.origin = 0;
    root.tau = r * zeta2[0];
    return root;
  }

  const bool last = (k == m - 1);
  const double width = last ? r : (delta[k + 1] - delta[k]);

  // Pick the origin pole: the side of the interval midpoint the root lies on.
  if (last) {
    root.origin = m - 1;
  } else {
    const double mid = delta[k] + 0.5 * width;
    double fmid = 1.0;
    for (int i = 0; i < m; ++i) fmid += r * zeta2[i] / (delta[i] - mid);
    root.origin = (fmid > 0.0) ? k : k + 1;
  }

  std::vector<double> g(m);
  for (int i = 0; i < m; ++i) g[i] = delta[i] - delta[root.origin];

  // Bracket in tau with f(lo) < 0 < f(hi) (open at pole endpoints).
  double lo, hi;
  if (last) {
    lo = 0.0;
    hi = r;
  } else if (root.origin == k) {
    lo = 0.0;
    hi = 0.5 * width;
  } else {
    lo = -0.5 * width;
    hi = 0.0;
  }

  // The pole sums are split between the interval's bounding poles: indices
  // <= js aggregate into a matched term at g[js], the rest at g[js+1].
  const int js = last ? m - 2 : k;
  const double a = g[js];
  const double b = g[js + 1];

  double tau = 0.5 * (lo + hi);
  for (int iter = 0; iter < 100; ++iter) {
    double scale = 1.0;
    double psi = 0.0, dpsi = 0.0, phi = 0.0, dphi = 0.0;
    for (int i = 0; i < m; ++i) {
      const double term = r * zeta2[i] / (g[i] - tau);
      scale += std::abs(term);
      if (i <= js) {
        psi += term;
        dpsi += term / (g[i] - tau);
      } else {
        phi += term;
        dphi += term / (g[i] - tau);
      }
    }
    const double f = 1.0 + psi + phi;
    if (std::abs(f) <= 32.0 * kEps * scale) break;
    if (f > 0.0) {
      hi = tau;
    } else {
      lo = tau;
    }

    // Matched rational model: c + W1/(a - t) + W2/(b - t) with the value and
    // slope of each pole sum reproduced at tau. Solving for the correction
    // eta = t - tau gives  A*eta^2 - B*eta + C = 0  with Da = a - tau,
    // Db = b - tau.
    const double Da = a - tau;
    const double Db = b - tau;
    const double W1 = dpsi * Da * Da;
    const double W2 = dphi * Db * Db;
    const double c = f - dpsi * Da - dphi * Db;
    const double A = c;
    const double B = c * (Da + Db) + W1 + W2;
    const double C = c * Da * Db + W1 * Db + W2 * Da;

    double eta = std::numeric_limits<double>::quiet_NaN();
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      // Smaller-magnitude root of the quadratic (the nearby crossing).
      if (B > 0.0) {
        eta = 2.0 * C / (B + std::sqrt(disc));
      } else if (A != 0.0) {
        eta = (B - std::sqrt(disc)) / (2.0 * A);
      } else if (B != 0.0) {
        eta = C / B;
      }
    }

    double cand = tau + eta;
    // eta must move against the sign of f (f > 0 means the root lies left).
    if (!std::isfinite(cand) || f * eta > 0.0 || !(cand > lo && cand < hi)) {
      cand = 0.5 * (lo + hi);  // safeguarded bisection step
    }
    if (cand == tau) break;
    const double step = std::abs(cand - tau);
    tau = cand;
    if (step <= 8.0 * kEps * std::abs(tau)) break;
  }

  root.tau = tau;
  return root;
}

EigenSystem sorted_system(std::vector<double>& vals, Matrix& vecs) {
  const Eigen::Index n = vecs.rows();
  std::vector<int> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return vals[i] < vals[j]; });
  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values[j] = vals[order[j]];
    out.vectors.col(j) = vecs.col(order[j]);
  }
  return out;
}

// Core update for rho > 0: D + rho * w * w' in the eigenbasis carried by V.
EigenSystem update_core(Matrix V, std::vector<double> d, Vector w, double rho) {
  const Eigen::Index n = V.rows();
  const double wnorm = w.norm();

  const double dscale = std::max({std::abs(d.front()), std::abs(d.back()),
                                  rho * wnorm * wnorm});
  const double tol_w = 1e-12 * wnorm;       // negligible update component
  const double tol_gap = 16.0 * kEps * std::max(dscale, 1e-300);

  std::vector<char> active(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) active[i] = std::abs(w[i]) >= tol_w;

  std::vector<int> act;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[i]) act.push_back(static_cast<int>(i));
  }

  // Rotate away repeated eigenvalues: a Givens rotation on a near-degenerate
  // pair concentrates the update weight in one coordinate and deflates the
  // other; the off-diagonal it creates is bounded by the gap and dropped.
  {
    std::vector<int> survivors;
    std::size_t a = 0;
    while (a < act.size()) {
      int i = act[a];
      std::size_t bpos = a + 1;
      while (bpos < act.size() && d[act[bpos]] - d[i] <= tol_gap) {
        const int j = act[bpos];
        const double rr = std::hypot(w[i], w[j]);
        const double c = w[i] / rr;
        const double s = w[j] / rr;
        const Vector vi = V.col(i);
        const Vector vj = V.col(j);
        V.col(i) = c * vi + s * vj;
        V.col(j) = -s * vi + c * vj;
        const double di = c * c * d[i] + s * s * d[j];
        const double dj = s * s * d[i] + c * c * d[j];
        d[i] = di;
        d[j] = dj;
        w[i] = rr;
        w[j] = 0.0;
        active[j] = 0;
        ++bpos;
      }
      survivors.push_back(i);
      a = bpos;
    }
    act = std::move(survivors);
  }

  const int m = static_cast<int>(act.size());
  std::vector<double> vals(d.begin(), d.end());

  if (m == 0) {
    return sorted_system(vals, V);
  }

  std::vector<double> delta(m);
  Vector wa(m);
  for (int j = 0; j < m; ++j) {
    delta[j] = d[act[j]];
    wa[j] = w[act[j]];
  }
  const double wn2 = wa.squaredNorm();
  const double r = rho * wn2;
  std::vector<double> zeta2(m);
  for (int j = 0; j < m; ++j) zeta2[j] = wa[j] * wa[j] / wn2;

  std::vector<SecularRoot> roots(m);
  for (int k = 0; k < m; ++k) roots[k] = solve_secular_root(delta, zeta2, r, k);

  // Recompute stabilized weights so the computed roots are the exact
  // eigenvalues of a nearby rank-one update; eigenvectors built from these
  // weights are orthogonal to working precision.
  std::vector<double> zhat(m);
  for (int i = 0; i < m; ++i) {
    double prod = (delta[roots[i].origin] - delta[i]) + roots[i].tau;  // mu_i - delta_i
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const double num = (delta[roots[j].origin] - delta[i]) + roots[j].tau;
      prod *= num / (delta[j] - delta[i]);
    }
    prod /= r;
    zhat[i] = std::copysign(std::sqrt(std::max(prod, 0.0)), wa[i]);
  }

  Matrix S(m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const double dij = (delta[i] - delta[roots[j].origin]) - roots[j].tau;  // delta_i - mu_j
      S(i, j) = zhat[i] / dij;
    }
    S.col(j).normalize();
  }

  Matrix Vact(n, m);
  for (int j = 0; j < m; ++j) Vact.col(j) = V.col(act[j]);
  const Matrix Vnew = Vact * S;  // the single dense back-transformation

  for (int j = 0; j < m; ++j) {
    vals[act[j]] = roots[j].value(delta);
    V.col(act[j]) = Vnew.col(j);
  }
  return sorted_system(vals, V);
}

}  // namespace

EigenSystem eig(const SymmetricMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.m());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eig: dense symmetric eigensolver failed to converge on a " +
                           std::to_string(a.size()) + "x" + std::to_string(a.size()) +
                           " matrix");
  }
  EigenSystem es;
  es.values = solver.eigenvalues();
  es.vectors = solver.eigenvectors();
  return es;
}

SymmetricMatrix psd_part(const EigenSystem& es) {
  const Vector clamped = es.values.cwiseMax(0.0);
  return SymmetricMatrix(es.vectors * clamped.asDiagonal() * es.vectors.transpose());
}

SymmetricMatrix psd_part(const SymmetricMatrix& a) { return psd_part(eig(a)); }

EigenSystem rank_one_update_eig(const EigenSystem& base, const Vector& u, double rho) {
  const Eigen::Index n = base.n();
  if (n == 0 || base.vectors.rows() != n || base.vectors.cols() != n) {
    throw ValidationError("rank_one_update_eig: malformed eigensystem");
  }
  if (u.size() != n) {
    throw ValidationError("rank_one_update_eig: update vector has size " +
                          std::to_string(u.size()) + ", expected " + std::to_string(n));
  }
  if (!u.allFinite() || !std::isfinite(rho)) {
    throw ValidationError("rank_one_update_eig: non-finite input");
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (base.values[i] > base.values[i + 1]) {
      throw ValidationError("rank_one_update_eig: base eigenvalues must be ascending");
    }
  }

  if (rho == 0.0) return base;

  if (rho < 0.0) {
    // X + rho u u' = -((-X) + (-rho) u u'); mirror, update, mirror back.
    EigenSystem neg;
    neg.values = (-base.values).reverse();
    neg.vectors = base.vectors.rowwise().reverse();
    EigenSystem res = rank_one_update_eig(neg, u, -rho);
    EigenSystem out;
    out.values = (-res.values).reverse();
    out.vectors = res.vectors.rowwise().reverse();
    return out;
  }

  Vector w = base.vectors.transpose() * u;
  if (w.norm() == 0.0) return base;

  std::vector<double> d(base.values.data(), base.values.data() + n);
  return update_core(base.vectors, std::move(d), std::move(w), rho);
}

}  // namespace iksvm
