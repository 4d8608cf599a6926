#pragma once

#include <optional>

#include "iksvm/model.hpp"
#include "iksvm/types.hpp"

namespace iksvm {

// Strictly positive per-point penalty weights h; the kernel deviation at
// entry (i, j) is charged h_i * h_j.
struct PenaltyWeights {
  Vector h;

  explicit PenaltyWeights(Vector h_in);
};

// A learned kernel: the base kernel, the rank-one direction added to it, the
// penalty that scaled that direction, and the realized (materialized) matrix.
// When `projected` is true the materialized matrix went through a PSD
// projection and is positive semidefinite up to roundoff.
struct ProxyKernel {
  SymmetricMatrix base;
  Vector update_vector;
  double rho = 1.0;
  bool projected = true;
  SymmetricMatrix materialized;
};

// Builds learned kernels for one fixed base kernel. The base decomposition is
// computed once at construction; every subsequent kernel evaluation reuses it
// through the rank-one eigendecomposition update, so only the factory
// constructor pays the full O(n^3) factorization.
class ProxyFactory {
 public:
  explicit ProxyFactory(SymmetricMatrix k0);
  ProxyFactory(SymmetricMatrix k0, PenaltyWeights weights);

  Eigen::Index size() const { return base_.size(); }
  const SymmetricMatrix& base() const { return base_; }
  const EigenSystem& base_eig() const { return base_eig_; }

  bool has_weights() const { return weights_.has_value(); }
  const PenaltyWeights& weights() const;
  // B = W^{1/2} K0 W^{1/2}, the symmetrically weight-scaled base kernel.
  const SymmetricMatrix& scaled_base() const;
  const EigenSystem& scaled_base_eig() const;

  // Eigendecomposition of K0 + u u' / (4 rho) via the cached base system.
  EigenSystem updated_system(const Vector& u, double rho) const;
  // Eigendecomposition of B + q q' / 4 (componentwise variant, scaled space).
  EigenSystem scaled_updated_system(const Vector& q) const;

  // (K0 + (Y alpha)(Y alpha)' / (4 rho))_+ ; the unique minimizer of the
  // penalized kernel subproblem for two-class labels.
  ProxyKernel classification(const Vector& alpha, const Vector& y, double rho) const;
  // (K0 + alpha alpha' / (4 rho))_+ ; labels do not appear. Serves both
  // regression and one-class estimation.
  ProxyKernel regression(const Vector& alpha, double rho) const;
  // K0 + (Y alpha)(Y alpha)' / (4 rho) with no projection; intended for PSD
  // base kernels, where the sum is already PSD.
  ProxyKernel mercer(const Vector& alpha, const Vector& y, double rho) const;
  // W^{-1/2} ((W^{1/2} (K0 + (W^{-1}Y alpha)(W^{-1}Y alpha)'/4) W^{1/2})_+) W^{-1/2};
  // requires the factory to have been constructed with weights.
  ProxyKernel weighted(const Vector& alpha, const Vector& y) const;

  // Number of full O(n^3) eigendecompositions this factory has performed.
  int full_eig_count() const { return full_eig_count_; }

 private:
  SymmetricMatrix base_;
  EigenSystem base_eig_;
  std::optional<PenaltyWeights> weights_;
  std::optional<SymmetricMatrix> scaled_base_;
  std::optional<EigenSystem> scaled_base_eig_;
  int full_eig_count_ = 0;
};

// One-shot conveniences; each builds a transient factory (one full
// eigendecomposition). Prefer ProxyFactory in loops.
ProxyKernel proxy_classification(const SymmetricMatrix& k0, const Vector& alpha,
                                 const Vector& y, double rho);
ProxyKernel proxy_regression(const SymmetricMatrix& k0, const Vector& alpha, double rho);
ProxyKernel proxy_mercer(const SymmetricMatrix& k0, const Vector& alpha,
                         const Vector& y, double rho);
ProxyKernel proxy_weighted(const SymmetricMatrix& k0, const Vector& alpha,
                           const Vector& y, const PenaltyWeights& weights);

// Assembles the kernel over train-plus-test points for prediction: the train
// block receives the model's rank-one update, cross and test blocks are kept,
// and the whole matrix is projected onto the PSD cone. `cross_k` is
// test-by-train; `test_k` is test-by-test and may be 0x0 (no test points), in
// which case the result is the projected train block alone. Componentwise
// models are rejected: their transform does not reduce to a flat rank-one
// update of the assembled matrix.
SymmetricMatrix full_kernel_for_testing(const SymmetricMatrix& train_k0,
                                        const Matrix& cross_k, const Matrix& test_k,
                                        const TrainedModel& model);

}  // namespace iksvm
