#include "iksvm/kernels.hpp"

#include <cmath>
#include <sstream>

#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

constexpr double kShiftMargin = 1e-8;

bool is_binary(const Vector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0 && x[i] != 1.0) return false;
  }
  return true;
}

double simpson_value(const Vector& x, const Vector& z) {
  if (!is_binary(x) || !is_binary(z)) {
    throw ValidationError("simpson kernel requires 0/1 features");
  }
  const double nx = x.sum();
  const double nz = z.sum();
  const double smaller = std::min(nx, nz);
  if (smaller == 0.0) return 0.0;  // empty support set matches nothing
  return x.dot(z) / smaller;
}

void validate_spec(const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::kGaussian:
      if (!(spec.gamma > 0.0)) {
        throw ValidationError("gaussian kernel needs gamma > 0, got " +
                              std::to_string(spec.gamma));
      }
      break;
    case KernelFamily::kSigmoid:
      if (!std::isfinite(spec.a) || !std::isfinite(spec.b)) {
        throw ValidationError("sigmoid kernel parameters must be finite");
      }
      break;
    case KernelFamily::kPrecomputed:
      throw ValidationError(
          "precomputed kernels are loaded from file, not evaluated on features");
    default:
      break;
  }
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("kernel spec: cannot parse " + key + "=" + text);
  }
}

}  // namespace

LabeledDataset make_dataset(const Matrix& features, const Vector& labels) {
  if (features.rows() == 0) {
    throw ValidationError("dataset is empty");
  }
  if (features.rows() != labels.size()) {
    throw ValidationError("dataset has " + std::to_string(features.rows()) +
                          " feature rows but " + std::to_string(labels.size()) +
                          " labels");
  }
  if (!features.allFinite()) {
    throw ValidationError("dataset features must be finite");
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0) {
      throw ValidationError("label at row " + std::to_string(i) +
                            " is not +1/-1: " + std::to_string(labels[i]));
    }
  }
  return LabeledDataset{features, labels};
}

KernelSpec KernelSpec::parse(const std::string& text) {
  KernelSpec spec;
  const std::size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::string params =
      (colon == std::string::npos) ? std::string() : text.substr(colon + 1);

  if (name == "linear") {
    spec.family = KernelFamily::kLinear;
  } else if (name == "gaussian") {
    spec.family = KernelFamily::kGaussian;
  } else if (name == "sigmoid") {
    spec.family = KernelFamily::kSigmoid;
  } else if (name == "simpson") {
    spec.family = KernelFamily::kSimpson;
  } else if (name == "precomputed") {
    spec.family = KernelFamily::kPrecomputed;
    spec.path = params;
    if (spec.path.empty()) {
      throw ValidationError("kernel spec: precomputed needs a path, e.g. precomputed:K.csv");
    }
    return spec;
  } else {
    throw ValidationError("kernel spec: unknown family '" + name + "'");
  }

  std::stringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("kernel spec: expected key=value, got '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "gamma" && spec.family == KernelFamily::kGaussian) {
      spec.gamma = parse_double(key, val);
    } else if (key == "a" && spec.family == KernelFamily::kSigmoid) {
      spec.a = parse_double(key, val);
    } else if (key == "b" && spec.family == KernelFamily::kSigmoid) {
      spec.b = parse_double(key, val);
    } else {
      throw ValidationError("kernel spec: parameter '" + key +
                            "' does not apply to '" + name + "'");
    }
  }
  return spec;
}

std::string KernelSpec::to_string() const {
  std::ostringstream out;
  switch (family) {
    case KernelFamily::kLinear:
      out << "linear";
      break;
    case KernelFamily::kGaussian:
      out << "gaussian:gamma=" << gamma;
      break;
    case KernelFamily::kSigmoid:
      out << "sigmoid:a=" << a << ",b=" << b;
      break;
    case KernelFamily::kSimpson:
      out << "simpson";
      break;
    case KernelFamily::kPrecomputed:
      out << "precomputed:" << path;
      break;
  }
  return out.str();
}

double kernel_value(const KernelSpec& spec, const Vector& x, const Vector& z) {
  if (x.size() != z.size()) {
    throw ValidationError("kernel_value: mismatched feature lengths");
  }
  switch (spec.family) {
    case KernelFamily::kLinear:
      return x.dot(z);
    case KernelFamily::kGaussian:
      return std::exp(-spec.gamma * (x - z).squaredNorm());
    case KernelFamily::kSigmoid:
      return std::tanh(spec.a * x.dot(z) + spec.b);
    case KernelFamily::kSimpson:
      return simpson_value(x, z);
    case KernelFamily::kPrecomputed:
      throw ValidationError(
          "precomputed kernels are loaded from file, not evaluated on features");
  }
  throw ValidationError("kernel_value: bad kernel family");
}

SymmetricMatrix gram(const Matrix& features, const KernelSpec& spec) {
  validate_spec(spec);
  const Eigen::Index n = features.rows();
  if (n == 0) throw ValidationError("gram: empty feature matrix");

  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kernel_value(spec, features.row(i), features.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return SymmetricMatrix(k);
}

Matrix cross_gram(const Matrix& rows, const Matrix& cols, const KernelSpec& spec) {
  validate_spec(spec);
  if (rows.cols() != cols.cols()) {
    throw ValidationError("cross_gram: feature dimensions differ (" +
                          std::to_string(rows.cols()) + " vs " +
                          std::to_string(cols.cols()) + ")");
  }
  Matrix k(rows.rows(), cols.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < cols.rows(); ++j) {
      k(i, j) = kernel_value(spec, rows.row(i), cols.row(j));
    }
  }
  return k;
}

SpectralMode spectral_mode_from_string(const std::string& name) {
  if (name == "denoise") return SpectralMode::kDenoise;
  if (name == "flip") return SpectralMode::kFlip;
  if (name == "shift") return SpectralMode::kShift;
  throw ValidationError("unknown spectral transform '" + name +
                        "' (expected denoise, flip, or shift)");
}

std::string to_string(SpectralMode mode) {
  switch (mode) {
    case SpectralMode::kDenoise:
      return "denoise";
    case SpectralMode::kFlip:
      return "flip";
    case SpectralMode::kShift:
      return "shift";
  }
  return "?";
}

SymmetricMatrix spectral_transform(const SymmetricMatrix& k, SpectralMode mode) {
  switch (mode) {
    case SpectralMode::kDenoise:
      return psd_part(k);
    case SpectralMode::kFlip: {
      EigenSystem es = eig(k);
      const Vector flipped = es.values.cwiseAbs();
      return SymmetricMatrix(es.vectors * flipped.asDiagonal() *
                             es.vectors.transpose());
    }
    case SpectralMode::kShift: {
      EigenSystem es = eig(k);
      const double bump = std::max(0.0, -es.values[0] + kShiftMargin);
      return SymmetricMatrix(k.m() + bump * Matrix::Identity(k.size(), k.size()));
    }
  }
  throw ValidationError("spectral_transform: bad mode");
}

}  // namespace iksvm
