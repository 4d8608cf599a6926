#pragma once

#include <string>

#include "iksvm/types.hpp"

namespace iksvm {

// Classification dataset: one feature row per point, labels in {-1, +1}.
struct LabeledDataset {
  Matrix features;
  Vector labels;

  Eigen::Index size() const { return features.rows(); }
};

// Validates shapes, label values, and finiteness.
LabeledDataset make_dataset(const Matrix& features, const Vector& labels);

enum class KernelFamily { kLinear, kGaussian, kSigmoid, kSimpson, kPrecomputed };

// Kernel description. Parseable from compact strings such as "linear",
// "gaussian:gamma=0.5", "sigmoid:a=1,b=-0.5", "simpson", or a file path for a
// precomputed matrix.
struct KernelSpec {
  KernelFamily family = KernelFamily::kLinear;
  double gamma = 1.0;  // gaussian: exp(-gamma * ||x - z||^2), gamma > 0
  double a = 1.0;      // sigmoid: tanh(a * <x, z> + b)
  double b = 0.0;
  std::string path;    // precomputed matrix location

  static KernelSpec parse(const std::string& text);
  std::string to_string() const;
};

// Single kernel evaluation between two feature vectors.
double kernel_value(const KernelSpec& spec, const Vector& x, const Vector& z);

// Gram matrix of all rows of `features` against themselves. Precomputed specs
// are rejected (they are loaded from file, not computed).
SymmetricMatrix gram(const Matrix& features, const KernelSpec& spec);

// Rectangular kernel block: rows of `rows` against rows of `cols`
// (result is rows.rows() x cols.rows()).
Matrix cross_gram(const Matrix& rows, const Matrix& cols, const KernelSpec& spec);

// Spectrum repair baselines for indefinite kernels: clip negative eigenvalues
// to zero, flip their sign, or shift the whole diagonal until the smallest
// eigenvalue clears a small margin.
enum class SpectralMode { kDenoise, kFlip, kShift };

SpectralMode spectral_mode_from_string(const std::string& name);
std::string to_string(SpectralMode mode);

SymmetricMatrix spectral_transform(const SymmetricMatrix& k, SpectralMode mode);

}  // namespace iksvm
