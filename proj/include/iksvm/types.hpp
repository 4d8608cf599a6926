#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace iksvm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy; the CLI maps these onto exit codes
// (validation failure = 2, non-convergence = 3, I/O failure = 4).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Square real matrix forced symmetric on construction, so downstream code can
// rely on m(i,j) == m(j,i) exactly. Rejects empty or non-finite input.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  explicit SymmetricMatrix(const Matrix& a) {
    if (a.rows() == 0 || a.rows() != a.cols()) {
      throw ValidationError("SymmetricMatrix: need a nonempty square matrix, got " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    if (!a.allFinite()) {
      throw ValidationError("SymmetricMatrix: entries must be finite");
    }
    mat_ = 0.5 * (a + a.transpose());
  }

  static SymmetricMatrix identity(Eigen::Index n) {
    return SymmetricMatrix(Matrix::Identity(n, n));
  }

  Eigen::Index size() const { return mat_.rows(); }
  const Matrix& m() const { return mat_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return mat_(i, j); }
  double frobenius_norm() const { return mat_.norm(); }

 private:
  Matrix mat_;
};

// Full eigendecomposition of a symmetric matrix: values ascending, vectors
// stored as columns aligned with values, orthonormal.
struct EigenSystem {
  Vector values;
  Matrix vectors;

  Eigen::Index n() const { return values.size(); }

  Matrix reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }
};

}  // namespace iksvm
