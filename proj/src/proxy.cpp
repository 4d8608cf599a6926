#include "iksvm/proxy.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

void check_alpha(const Vector& alpha, Eigen::Index n) {
  if (alpha.size() != n) {
    throw ValidationError("coefficient vector has length " + std::to_string(alpha.size()) +
                          ", kernel is " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!alpha.allFinite()) {
    throw ValidationError("coefficient vector must be finite");
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

void check_rho(double rho) {
  if (!(std::isfinite(rho) && rho > 0.0)) {
    throw ValidationError("penalty rho must be positive and finite");
  }
}

}  // namespace

PenaltyWeights::PenaltyWeights(Vector h_in) : h(std::move(h_in)) {
  if (h.size() == 0) {
    throw ValidationError("penalty weights must be nonempty");
  }
  if (!h.allFinite()) {
    throw ValidationError("penalty weights must be finite");
  }
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (h[i] <= 0.0) {
      throw ValidationError("penalty weights must be strictly positive, got " +
                            std::to_string(h[i]) + " at index " + std::to_string(i));
    }
  }
}

ProxyFactory::ProxyFactory(SymmetricMatrix k0)
    : base_(std::move(k0)), base_eig_(eig(base_)), full_eig_count_(1) {}

ProxyFactory::ProxyFactory(SymmetricMatrix k0, PenaltyWeights weights)
    : base_(std::move(k0)), base_eig_(eig(base_)), weights_(std::move(weights)),
      full_eig_count_(1) {
  if (weights_->h.size() != base_.size()) {
    throw ValidationError("penalty weights have length " +
                          std::to_string(weights_->h.size()) + ", kernel is " +
                          std::to_string(base_.size()) + "x" + std::to_string(base_.size()));
  }
  const Vector s = weights_->h.cwiseSqrt();
  scaled_base_ = SymmetricMatrix(s.asDiagonal() * base_.m() * s.asDiagonal());
  scaled_base_eig_ = eig(*scaled_base_);
  ++full_eig_count_;
}

const PenaltyWeights& ProxyFactory::weights() const {
  if (!weights_) {
    throw ValidationError("this factory was built without penalty weights");
  }
  return *weights_;
}

const SymmetricMatrix& ProxyFactory::scaled_base() const {
  weights();  // validates presence
  return *scaled_base_;
}

const EigenSystem& ProxyFactory::scaled_base_eig() const {
  weights();
  return *scaled_base_eig_;
}

EigenSystem ProxyFactory::updated_system(const Vector& u, double rho) const {
  check_rho(rho);
  check_alpha(u, base_.size());
  return rank_one_update_eig(base_eig_, u, 1.0 / (4.0 * rho));
}

EigenSystem ProxyFactory::scaled_updated_system(const Vector& q) const {
  check_alpha(q, base_.size());
  return rank_one_update_eig(scaled_base_eig(), q, 0.25);
}

ProxyKernel ProxyFactory::classification(const Vector& alpha, const Vector& y,
                                         double rho) const {
  check_labels(y, base_.size());
  check_alpha(alpha, base_.size());
  check_rho(rho);
  const Vector u = y.cwiseProduct(alpha);
  return ProxyKernel{base_, u, rho, true, psd_part(updated_system(u, rho))};
}

ProxyKernel ProxyFactory::regression(const Vector& alpha, double rho) const {
  check_alpha(alpha, base_.size());
  check_rho(rho);
  return ProxyKernel{base_, alpha, rho, true, psd_part(updated_system(alpha, rho))};
}

ProxyKernel ProxyFactory::mercer(const Vector& alpha, const Vector& y, double rho) const {
  check_labels(y, base_.size());
  check_alpha(alpha, base_.size());
  check_rho(rho);
  const Vector u = y.cwiseProduct(alpha);
  SymmetricMatrix realized(Matrix(base_.m() + u * u.transpose() / (4.0 * rho)));
  return ProxyKernel{base_, u, rho, false, std::move(realized)};
}

ProxyKernel ProxyFactory::weighted(const Vector& alpha, const Vector& y) const {
  const Vector& h = weights().h;
  check_labels(y, base_.size());
  check_alpha(alpha, base_.size());
  // Work in the scaled space: B + q q'/4 with q = W^{-1/2} Y alpha, project,
  // then undo the scaling.
  const Vector yalpha = y.cwiseProduct(alpha);
  const Vector q = yalpha.cwiseQuotient(h.cwiseSqrt());
  const SymmetricMatrix projected_scaled = psd_part(scaled_updated_system(q));
  const Vector inv_s = h.cwiseSqrt().cwiseInverse();
  SymmetricMatrix realized(
      Matrix(inv_s.asDiagonal() * projected_scaled.m() * inv_s.asDiagonal()));
  return ProxyKernel{base_, yalpha.cwiseQuotient(h), 1.0, true, std::move(realized)};
}

ProxyKernel proxy_classification(const SymmetricMatrix& k0, const Vector& alpha,
                                 const Vector& y, double rho) {
  return ProxyFactory(k0).classification(alpha, y, rho);
}

ProxyKernel proxy_regression(const SymmetricMatrix& k0, const Vector& alpha, double rho) {
  return ProxyFactory(k0).regression(alpha, rho);
}

ProxyKernel proxy_mercer(const SymmetricMatrix& k0, const Vector& alpha, const Vector& y,
                         double rho) {
  return ProxyFactory(k0).mercer(alpha, y, rho);
}

ProxyKernel proxy_weighted(const SymmetricMatrix& k0, const Vector& alpha, const Vector& y,
                           const PenaltyWeights& weights) {
  return ProxyFactory(k0, weights).weighted(alpha, y);
}

SymmetricMatrix full_kernel_for_testing(const SymmetricMatrix& train_k0,
                                        const Matrix& cross_k, const Matrix& test_k,
                                        const TrainedModel& model) {
  const Eigen::Index n = train_k0.size();
  const Eigen::Index t = test_k.rows();
  if (test_k.rows() != test_k.cols()) {
    throw ValidationError("test kernel block must be square, got " +
                          std::to_string(test_k.rows()) + "x" + std::to_string(test_k.cols()));
  }
  if (cross_k.rows() != t || cross_k.cols() != n) {
    throw ValidationError("cross kernel block must be " + std::to_string(t) + "x" +
                          std::to_string(n) + " (test rows by train columns), got " +
                          std::to_string(cross_k.rows()) + "x" +
                          std::to_string(cross_k.cols()));
  }
  if (!cross_k.allFinite() || !test_k.allFinite()) {
    throw ValidationError("kernel blocks must be finite");
  }
  if (model.variant == Variant::kWeighted) {
    throw ValidationError(
        "componentwise models cannot be assembled into a test-time kernel: the "
        "weighted transform is not a flat rank-one update of the full matrix");
  }
  check_alpha(model.update_vector, n);
  check_rho(model.rho);

  Matrix full(n + t, n + t);
  full.topLeftCorner(n, n) =
      train_k0.m() +
      model.update_vector * model.update_vector.transpose() / (4.0 * model.rho);
  full.topRightCorner(n, t) = cross_k.transpose();
  full.bottomLeftCorner(t, n) = cross_k;
  full.bottomRightCorner(t, t) = test_k;
  return psd_part(SymmetricMatrix(full));
}

}  // namespace iksvm
