#include <doctest.h>

#include <cmath>

#include "iksvm/symlin.hpp"
#include "oracles.hpp"

using iksvm::EigenSystem;
using iksvm::Matrix;
using iksvm::SymmetricMatrix;
using iksvm::Vector;
using iksvm::eig;
using iksvm::psd_part;
using iksvm::rank_one_update_eig;

namespace {

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

void check_valid_system(const EigenSystem& es, const Matrix& x, double recon_tol = 1e-7,
                        double orth_tol = 1e-8) {
  const Eigen::Index n = es.n();
  REQUIRE(es.vectors.rows() == n);
  REQUIRE(es.vectors.cols() == n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) CHECK(es.values[i] <= es.values[i + 1]);
  const Matrix vtv = es.vectors.transpose() * es.vectors;
  CHECK(max_abs(vtv - Matrix::Identity(n, n)) <= orth_tol);
  CHECK(max_abs(es.reconstruct() - x) <= recon_tol * std::max(1.0, max_abs(x)));
}

}  // namespace

TEST_SUITE("symlin") {

TEST_CASE("symmetric matrix construction symmetrizes and validates") {
  Matrix a(2, 2);
  a << 1.0, 2.0, 4.0, 1.0;
  SymmetricMatrix s(a);
  CHECK(s(0, 1) == doctest::Approx(3.0));
  CHECK(s(1, 0) == doctest::Approx(3.0));

  CHECK_THROWS_AS(SymmetricMatrix(Matrix::Zero(2, 3)), iksvm::ValidationError);
  CHECK_THROWS_AS(SymmetricMatrix(Matrix::Zero(0, 0)), iksvm::ValidationError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(SymmetricMatrix{bad}, iksvm::ValidationError);
}

TEST_CASE("eig on a diagonal matrix returns ascending eigenvalues") {
  Matrix a(2, 2);
  a << 3.0, 0.0, 0.0, 1.0;
  EigenSystem es = eig(SymmetricMatrix(a));
  CHECK(es.values[0] == doctest::Approx(1.0));
  CHECK(es.values[1] == doctest::Approx(3.0));
  check_valid_system(es, a);
}

TEST_CASE("eig handles 1x1 and random dense matrices") {
  EigenSystem one = eig(SymmetricMatrix(Matrix::Constant(1, 1, -2.5)));
  CHECK(one.values[0] == doctest::Approx(-2.5));
  CHECK(std::abs(one.vectors(0, 0)) == doctest::Approx(1.0));

  oracles::Rng rng(20260815);
  for (int trial = 0; trial < 5; ++trial) {
    SymmetricMatrix a = oracles::random_symmetric(rng, 30, 2.0);
    check_valid_system(eig(a), a.m());
  }
}

TEST_CASE("psd_part of a known indefinite matrix") {
  Matrix a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;  // eigenvalues -1 and 3
  EigenSystem es = eig(SymmetricMatrix(a));
  CHECK(es.values[0] == doctest::Approx(-1.0));
  CHECK(es.values[1] == doctest::Approx(3.0));
  SymmetricMatrix p = psd_part(SymmetricMatrix(a));
  CHECK(p(0, 0) == doctest::Approx(1.5));
  CHECK(p(0, 1) == doctest::Approx(1.5));
  CHECK(p(1, 0) == doctest::Approx(1.5));
  CHECK(p(1, 1) == doctest::Approx(1.5));
}

TEST_CASE("psd_part fixes PSD input and is idempotent") {
  oracles::Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    SymmetricMatrix p = oracles::random_psd(rng, 12);
    CHECK(max_abs(psd_part(p).m() - p.m()) <= 1e-10 * std::max(1.0, max_abs(p.m())));

    SymmetricMatrix a = oracles::random_symmetric(rng, 12);
    SymmetricMatrix once = psd_part(a);
    SymmetricMatrix twice = psd_part(once);
    CHECK(max_abs(twice.m() - once.m()) <= 1e-10 * std::max(1.0, max_abs(once.m())));
    CHECK(eig(once).values.minCoeff() >= -1e-10);
  }
}

TEST_CASE("psd_part is the Frobenius-nearest PSD matrix") {
  oracles::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    SymmetricMatrix a = oracles::random_symmetric(rng, 8);
    const double best = (psd_part(a).m() - a.m()).norm();
    for (int cand = 0; cand < 50; ++cand) {
      SymmetricMatrix p = oracles::random_psd(rng, 8);
      CHECK(best <= (p.m() - a.m()).norm() + 1e-12);
    }
  }
}

TEST_CASE("rank-one update on a diagonal base with a deflating component") {
  Matrix a(2, 2);
  a << 1.0, 0.0, 0.0, 2.0;
  EigenSystem base = eig(SymmetricMatrix(a));
  Vector u(2);
  u << 1.0, 0.0;
  EigenSystem up = rank_one_update_eig(base, u, 0.5);
  CHECK(up.values[0] == doctest::Approx(1.5));
  CHECK(up.values[1] == doctest::Approx(2.0));
  Matrix expected = a + 0.5 * u * u.transpose();
  check_valid_system(up, expected);
}

TEST_CASE("rank-one update matches full re-decomposition on random dense problems") {
  oracles::Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 50;
    SymmetricMatrix x = oracles::random_symmetric(rng, n, 1.5);
    Vector u = oracles::random_vector(rng, n);
    const double rho = (trial % 2 == 0) ? 0.8 : 25.0;

    EigenSystem base = eig(x);
    EigenSystem fast = rank_one_update_eig(base, u, rho);
    Matrix updated = x.m() + rho * u * u.transpose();
    EigenSystem slow = eig(SymmetricMatrix(updated));

    CHECK((fast.values - slow.values).cwiseAbs().maxCoeff() <= 1e-8);
    check_valid_system(fast, updated);
  }
}

TEST_CASE("rank-one update obeys interlacing and trace conservation") {
  oracles::Rng rng(456);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40;
    SymmetricMatrix x = oracles::random_symmetric(rng, n);
    Vector u = oracles::random_vector(rng, n);
    const double rho = 2.0;
    EigenSystem base = eig(x);
    EigenSystem up = rank_one_update_eig(base, u, rho);

    const double slack = 1e-9 * std::max(1.0, std::abs(base.values[n - 1]));
    for (int i = 0; i < n; ++i) {
      CHECK(up.values[i] >= base.values[i] - slack);
      if (i + 1 < n) CHECK(up.values[i] <= base.values[i + 1] + slack);
    }
    CHECK(up.values[n - 1] <= base.values[n - 1] + rho * u.squaredNorm() + slack);

    const double tr_expected = base.values.sum() + rho * u.squaredNorm();
    CHECK(up.values.sum() == doctest::Approx(tr_expected).epsilon(1e-10));
  }
}

TEST_CASE("rank-one update with negative weight mirrors the problem") {
  oracles::Rng rng(789);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 30;
    SymmetricMatrix x = oracles::random_symmetric(rng, n);
    Vector u = oracles::random_vector(rng, n);
    const double rho = -1.7;
    EigenSystem fast = rank_one_update_eig(eig(x), u, rho);
    Matrix updated = x.m() + rho * u * u.transpose();
    EigenSystem slow = eig(SymmetricMatrix(updated));
    CHECK((fast.values - slow.values).cwiseAbs().maxCoeff() <= 1e-8);
    check_valid_system(fast, updated);
  }
}

TEST_CASE("rank-one update deflation edge cases") {
  oracles::Rng rng(1010);

  SUBCASE("zero update vector or zero weight returns the base") {
    SymmetricMatrix x = oracles::random_symmetric(rng, 8);
    EigenSystem base = eig(x);
    EigenSystem same = rank_one_update_eig(base, Vector::Zero(8), 3.0);
    CHECK(max_abs(same.vectors - base.vectors) == 0.0);
    EigenSystem same2 = rank_one_update_eig(base, oracles::random_vector(rng, 8), 0.0);
    CHECK((same2.values - base.values).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("identity base forces full duplicate deflation") {
    const int n = 12;
    EigenSystem base;
    base.values = Vector::Ones(n);
    base.vectors = Matrix::Identity(n, n);
    Vector u = oracles::random_vector(rng, n);
    EigenSystem up = rank_one_update_eig(base, u, 1.3);
    Matrix updated = Matrix::Identity(n, n) + 1.3 * u * u.transpose();
    EigenSystem slow = eig(SymmetricMatrix(updated));
    CHECK((up.values - slow.values).cwiseAbs().maxCoeff() <= 1e-8);
    check_valid_system(up, updated);
  }

  SUBCASE("update aligned with a single eigenvector shifts only that eigenvalue") {
    SymmetricMatrix x(Matrix(Vector::LinSpaced(6, 1.0, 6.0).asDiagonal()));
    EigenSystem base = eig(x);
    Vector u = base.vectors.col(2);
    EigenSystem up = rank_one_update_eig(base, u, 0.25);
    Matrix updated = x.m() + 0.25 * u * u.transpose();
    check_valid_system(up, updated);
    CHECK((up.values - eig(SymmetricMatrix(updated)).values).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("clustered spectrum with tiny gaps") {
    const int n = 10;
    Vector d(n);
    for (int i = 0; i < n; ++i) d[i] = 2.0 + 1e-13 * i;
    d[n - 1] = 5.0;
    d[n - 2] = 5.0 + 1e-14;
    SymmetricMatrix x{Matrix(d.asDiagonal())};
    EigenSystem base = eig(x);
    Vector u = oracles::random_vector(rng, n);
    EigenSystem up = rank_one_update_eig(base, u, 1.0);
    Matrix updated = x.m() + u * u.transpose();
    check_valid_system(up, updated);
    CHECK((up.values - eig(SymmetricMatrix(updated)).values).cwiseAbs().maxCoeff() <= 1e-8);
  }

  SUBCASE("input validation") {
    SymmetricMatrix x = oracles::random_symmetric(rng, 5);
    EigenSystem base = eig(x);
    CHECK_THROWS_AS(rank_one_update_eig(base, Vector::Zero(4), 1.0), iksvm::ValidationError);
    EigenSystem shuffled = base;
    std::swap(shuffled.values[0], shuffled.values[4]);
    CHECK_THROWS_AS(rank_one_update_eig(shuffled, Vector::Zero(5), 1.0),
                    iksvm::ValidationError);
  }
}

}  // TEST_SUITE
