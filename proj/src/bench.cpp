#include "iksvm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "iksvm/objective.hpp"
#include "iksvm/proxy.hpp"
#include "iksvm/refqp.hpp"
#include "iksvm/solvers.hpp"
#include "iksvm/symlin.hpp"

namespace iksvm {

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& token, const std::string& where) {
  const std::string t = trim(token);
  if (t.empty()) throw ValidationError(where + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) {
    throw ValidationError(where + ": cannot parse number '" + t + "'");
  }
  return v;
}

long parse_integer(const std::string& token, const std::string& where) {
  const std::string t = trim(token);
  if (t.empty()) throw ValidationError(where + ": empty integer");
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) {
    throw ValidationError(where + ": cannot parse integer '" + t + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

// Maps raw labels onto {-1, +1}: passes -1/+1 through, converts a pure
// {0, 1} labeling with a warning, and rejects anything else.
Vector finalize_labels(std::vector<double> raw, const std::string& path) {
  bool has_zero = false;
  bool has_minus = false;
  for (double v : raw) {
    if (v == 0.0) has_zero = true;
    if (v == -1.0) has_minus = true;
  }
  if (has_zero && has_minus) {
    throw ValidationError(path + ": labels mix 0 and -1; use one convention");
  }
  if (has_zero) {
    std::cerr << "warning: " << path << ": labels in {0,1} mapped to {-1,+1}\n";
    for (double& v : raw) {
      if (v == 0.0) v = -1.0;
    }
  }
  Vector y(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) y[static_cast<Eigen::Index>(i)] = raw[i];
  return y;
}

LabeledDataset load_sparse_dataset(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<std::vector<std::pair<Eigen::Index, double>>> points;
  std::vector<double> raw_labels;
  Eigen::Index dim = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::stringstream ss(text);
    std::string token;
    ss >> token;
    const double label = parse_number(token, where + ": label");
    if (label != 1.0 && label != -1.0 && label != 0.0) {
      throw ValidationError(where + ": label must be -1, 0, or +1, got '" + token + "'");
    }
    std::vector<std::pair<Eigen::Index, double>> feats;
    while (ss >> token) {
      const std::size_t colon = token.find(':');
      if (colon == std::string::npos) {
        throw ValidationError(where + ": expected index:value, got '" + token + "'");
      }
      const long idx = parse_integer(token.substr(0, colon), where + ": feature index");
      if (idx < 1) throw ValidationError(where + ": feature indices are 1-based");
      const double val = parse_number(token.substr(colon + 1), where + ": feature value");
      feats.emplace_back(static_cast<Eigen::Index>(idx - 1), val);
      dim = std::max(dim, static_cast<Eigen::Index>(idx));
    }
    raw_labels.push_back(label);
    points.push_back(std::move(feats));
  }
  if (points.empty()) throw ValidationError(path + ": dataset is empty");

  Matrix features = Matrix::Zero(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& [j, v] : points[i]) features(static_cast<Eigen::Index>(i), j) = v;
  }
  return make_dataset(features, finalize_labels(std::move(raw_labels), path));
}

LabeledDataset load_csv_dataset(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = split(text, ',');
    if (fields.empty()) throw ValidationError(where + ": empty row");
    const double label = parse_number(fields[0], where + ": label");
    if (label != 1.0 && label != -1.0 && label != 0.0) {
      throw ValidationError(where + ": label must be -1, 0, or +1");
    }
    std::vector<double> feats;
    feats.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      feats.push_back(parse_number(fields[j], where + ": column " + std::to_string(j + 1)));
    }
    if (!rows.empty() && feats.size() != rows.front().size()) {
      throw ValidationError(where + ": expected " + std::to_string(rows.front().size() + 1) +
                            " columns, got " + std::to_string(feats.size() + 1));
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw ValidationError(path + ": dataset is empty");

  Matrix features(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return make_dataset(features, finalize_labels(std::move(raw_labels), path));
}

std::string join_numbers(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_full(v[i]);
  }
  return out;
}

Vector parse_number_list(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  if (t.empty()) return Vector(0);
  const std::vector<std::string> fields = split(t, ',');
  Vector v(static_cast<Eigen::Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_number(fields[i], where);
  }
  return v;
}

// Runs fn(0..count-1) across a small thread pool; rethrows the first worker
// exception. Results must be written to per-index slots by the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::kClassification: return "classification";
    case Variant::kSvr: return "svr";
    case Variant::kOneClass: return "one-class";
    case Variant::kPerturb: return "perturb";
    case Variant::kWeighted: return "weighted";
  }
  throw ValidationError("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "classification") return Variant::kClassification;
  if (s == "svr") return Variant::kSvr;
  if (s == "one-class") return Variant::kOneClass;
  if (s == "perturb") return Variant::kPerturb;
  if (s == "weighted") return Variant::kWeighted;
  throw ValidationError("unknown variant '" + s + "'");
}

std::string status_to_string(SolverStatus s) {
  return s == SolverStatus::kConverged ? "converged" : "iteration-limit";
}

SolverStatus status_from_string(const std::string& s) {
  if (s == "converged") return SolverStatus::kConverged;
  if (s == "iteration-limit") return SolverStatus::kIterationLimit;
  throw ValidationError("unknown solver status '" + s + "'");
}

// Wraps a fixed-kernel dual solution in the common model record (no learned
// kernel update; predict uses the original cross block).
TrainedModel plain_model(const QpSolution& sol, const Vector& labels, double c) {
  TrainedModel model;
  model.variant = Variant::kClassification;
  model.alpha = sol.alpha;
  model.labels = labels;
  model.penalty_c = c;
  model.rho = 0.0;
  model.update_vector = Vector::Zero(labels.size());
  model.projected = false;
  model.bias = sol.bias;
  model.objective = sol.objective;
  model.gap = 0.0;
  model.status = SolverStatus::kConverged;
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset and kernel I/O
// ---------------------------------------------------------------------------

DatasetFormat dataset_format_from_string(const std::string& name) {
  if (name == "svmlight") return DatasetFormat::kSvmlight;
  if (name == "csv") return DatasetFormat::kCsv;
  throw ValidationError("unknown dataset format '" + name + "' (svmlight or csv)");
}

DatasetFormat guess_dataset_format(const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  return ext == ".csv" ? DatasetFormat::kCsv : DatasetFormat::kSvmlight;
}

LabeledDataset load_dataset(const std::string& path, DatasetFormat format) {
  return format == DatasetFormat::kSvmlight ? load_sparse_dataset(path)
                                            : load_csv_dataset(path);
}

void save_dataset(const std::string& path, const LabeledDataset& data,
                  DatasetFormat format) {
  std::ofstream out = open_for_write(path);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << (data.labels[i] > 0 ? "+1" : "-1");
    if (format == DatasetFormat::kSvmlight) {
      for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
        if (data.features(i, j) != 0.0) {
          out << ' ' << (j + 1) << ':' << fmt_full(data.features(i, j));
        }
      }
    } else {
      for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
        out << ',' << fmt_full(data.features(i, j));
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

SymmetricMatrix load_kernel(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = split(text, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) row.push_back(parse_number(f, where));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(where + ": ragged row (expected " +
                            std::to_string(rows.front().size()) + " values)");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": kernel file is empty");
  if (rows.size() != rows.front().size()) {
    throw ValidationError(path + ": kernel must be square, got " +
                          std::to_string(rows.size()) + "x" +
                          std::to_string(rows.front().size()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) {
    std::cerr << "warning: " << path << ": matrix asymmetry up to " << asym
              << "; symmetrizing\n";
  }
  return SymmetricMatrix(k);
}

void save_kernel(const std::string& path, const SymmetricMatrix& k) {
  std::ofstream out = open_for_write(path);
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    for (Eigen::Index j = 0; j < k.size(); ++j) {
      if (j) out << ',';
      out << fmt_full(k(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Metrics compute_metrics(const Vector& predicted, const Vector& actual) {
  if (predicted.size() != actual.size()) {
    throw ValidationError("metrics: prediction/label length mismatch");
  }
  if (predicted.size() == 0) throw ValidationError("metrics: empty prediction set");
  Metrics m;
  for (Eigen::Index i = 0; i < predicted.size(); ++i) {
    if (std::abs(predicted[i]) != 1.0 || std::abs(actual[i]) != 1.0) {
      throw ValidationError("metrics: labels must be -1 or +1");
    }
    if (actual[i] > 0) {
      (predicted[i] > 0 ? m.tp : m.fn)++;
    } else {
      (predicted[i] > 0 ? m.fp : m.tn)++;
    }
  }
  const double total = static_cast<double>(m.tp + m.tn + m.fp + m.fn);
  m.accuracy = 100.0 * static_cast<double>(m.tp + m.tn) / total;
  m.recall = (m.tp + m.fn) > 0
                 ? 100.0 * static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                 : 100.0;
  m.average = 0.5 * (m.accuracy + m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// Methods and configuration
// ---------------------------------------------------------------------------

Method method_from_string(const std::string& name) {
  if (name == "indefinite-pg") return Method::kIndefinitePg;
  if (name == "indefinite-accpm") return Method::kIndefiniteAccpm;
  if (name == "indefinite-exchange") return Method::kIndefiniteExchange;
  if (name == "perturb") return Method::kPerturb;
  if (name == "denoise") return Method::kDenoise;
  if (name == "flip") return Method::kFlip;
  if (name == "shift") return Method::kShift;
  if (name == "direct-svm") return Method::kDirectSvm;
  throw ValidationError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kIndefinitePg: return "indefinite-pg";
    case Method::kIndefiniteAccpm: return "indefinite-accpm";
    case Method::kIndefiniteExchange: return "indefinite-exchange";
    case Method::kPerturb: return "perturb";
    case Method::kDenoise: return "denoise";
    case Method::kFlip: return "flip";
    case Method::kShift: return "shift";
    case Method::kDirectSvm: return "direct-svm";
  }
  throw ValidationError("unknown method");
}

bool uses_learned_kernel(Method method) {
  switch (method) {
    case Method::kIndefinitePg:
    case Method::kIndefiniteAccpm:
    case Method::kIndefiniteExchange:
    case Method::kPerturb:
      return true;
    default:
      return false;
  }
}

bool uses_rho(Method method) { return uses_learned_kernel(method); }

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in = open_for_read(path);
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where + ": expected key = value");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string val = trim(text.substr(eq + 1));
    if (key == "train") {
      cfg.train_path = val;
    } else if (key == "test") {
      cfg.test_path = val;
    } else if (key == "format") {
      cfg.format = dataset_format_from_string(val);
    } else if (key == "kernel") {
      cfg.kernel = KernelSpec::parse(val);
    } else if (key == "method") {
      cfg.method = method_from_string(val);
    } else if (key == "c_grid") {
      const Vector v = parse_number_list(val, where);
      cfg.c_grid.assign(v.data(), v.data() + v.size());
    } else if (key == "rho_grid") {
      const Vector v = parse_number_list(val, where);
      cfg.rho_grid.assign(v.data(), v.data() + v.size());
    } else if (key == "folds") {
      cfg.folds = static_cast<int>(parse_integer(val, where));
    } else if (key == "seed") {
      cfg.seed = static_cast<unsigned long>(parse_integer(val, where));
    } else if (key == "gap_tol") {
      cfg.gap_tol = parse_number(val, where);
    } else if (key == "max_iter") {
      cfg.max_iter = parse_integer(val, where);
    } else if (key == "step_c") {
      cfg.step_scale = parse_number(val, where);
    } else if (key == "smooth_eps") {
      cfg.smooth_eps = parse_number(val, where);
    } else if (key == "binarize_threshold") {
      cfg.binarize_threshold = parse_number(val, where);
    } else if (key == "out") {
      cfg.out_dir = val;
    } else {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (train_path.empty()) throw ValidationError("config: train path is required");
  if (c_grid.empty()) throw ValidationError("config: c_grid must be nonempty");
  if (uses_rho(method) && rho_grid.empty()) {
    throw ValidationError("config: rho_grid must be nonempty for method " +
                          iksvm::to_string(method));
  }
  for (double c : c_grid) {
    if (!(c >= 0.0)) throw ValidationError("config: c values must be nonnegative");
  }
  for (double r : rho_grid) {
    if (uses_rho(method) && !(r > 0.0)) {
      throw ValidationError("config: rho values must be positive");
    }
  }
  if (folds < 2) throw ValidationError("config: folds must be at least 2");
  if (!(gap_tol > 0.0)) throw ValidationError("config: gap_tol must be positive");
  if (smooth_eps < 0.0) throw ValidationError("config: smooth_eps must be nonnegative");
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

std::vector<std::vector<Eigen::Index>> stratified_folds(const Vector& labels, int folds,
                                                        unsigned long seed) {
  const Eigen::Index n = labels.size();
  if (folds < 2) throw ValidationError("folds must be at least 2");
  if (static_cast<Eigen::Index>(folds) > n) {
    throw ValidationError("more folds than points (" + std::to_string(folds) + " > " +
                          std::to_string(n) + ")");
  }
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0) {
      throw ValidationError("fold stratification needs -1/+1 labels");
    }
    (labels[i] > 0 ? pos : neg).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  for (std::size_t j = 0; j < pos.size(); ++j) out[j % folds].push_back(pos[j]);
  for (std::size_t j = 0; j < neg.size(); ++j) out[j % folds].push_back(neg[j]);
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

TrainedModel train_method(const ExperimentConfig& cfg, const SymmetricMatrix& kernel,
                          const Vector& labels, double c, double rho) {
  switch (cfg.method) {
    case Method::kIndefinitePg: {
      PgConfig pg;
      pg.gap_tol = cfg.gap_tol;
      if (cfg.max_iter > 0) pg.max_iter = cfg.max_iter;
      if (cfg.step_scale > 0) pg.step_scale = cfg.step_scale;
      if (cfg.smooth_eps > 0) pg.smoothing = SmoothingConfig(cfg.smooth_eps);
      return projected_gradient_solve(TrainingProblem::classification(kernel, labels, c, rho),
                                      pg);
    }
    case Method::kIndefiniteAccpm: {
      AccpmConfig ac;
      ac.gap_tol = cfg.gap_tol;
      if (cfg.max_iter > 0) ac.max_iter = cfg.max_iter;
      if (cfg.smooth_eps > 0) ac.smoothing = SmoothingConfig(cfg.smooth_eps);
      return accpm_solve(TrainingProblem::classification(kernel, labels, c, rho), ac);
    }
    case Method::kIndefiniteExchange: {
      ExchangeConfig ex;
      ex.gap_tol = cfg.gap_tol;
      if (cfg.max_iter > 0) ex.max_iter = static_cast<int>(cfg.max_iter);
      return exchange_solve(TrainingProblem::classification(kernel, labels, c, rho), ex);
    }
    case Method::kPerturb: {
      PgConfig pg;
      pg.gap_tol = cfg.gap_tol;
      if (cfg.max_iter > 0) pg.max_iter = cfg.max_iter;
      if (cfg.step_scale > 0) pg.step_scale = cfg.step_scale;
      if (cfg.smooth_eps > 0) pg.smoothing = SmoothingConfig(cfg.smooth_eps);
      return projected_gradient_solve(TrainingProblem::perturb(kernel, labels, c, rho), pg);
    }
    case Method::kDenoise:
    case Method::kFlip:
    case Method::kShift: {
      const SpectralMode mode = cfg.method == Method::kDenoise ? SpectralMode::kDenoise
                                : cfg.method == Method::kFlip  ? SpectralMode::kFlip
                                                               : SpectralMode::kShift;
      return plain_model(solve_svm_dual(spectral_transform(kernel, mode), labels, c), labels,
                         c);
    }
    case Method::kDirectSvm: {
      QpConfig qp;
      qp.allow_indefinite = true;
      return plain_model(solve_svm_dual(kernel, labels, c, qp), labels, c);
    }
  }
  throw ValidationError("unknown method");
}

SymmetricMatrix assemble_test_kernel(Method method, const SymmetricMatrix& train_k,
                                     const Matrix& cross_k, const Matrix& test_k,
                                     const TrainedModel& model) {
  if (uses_learned_kernel(method)) {
    return full_kernel_for_testing(train_k, cross_k, test_k, model);
  }
  const Eigen::Index n = train_k.size();
  const Eigen::Index m = cross_k.rows();
  if (cross_k.cols() != n) {
    throw ValidationError("cross-kernel block must have one column per training point");
  }
  if (test_k.rows() != m || test_k.cols() != m) {
    throw ValidationError("test-kernel block must be square with one row per test point");
  }
  if (m == 0) return train_k;
  Matrix full(n + m, n + m);
  full.topLeftCorner(n, n) = train_k.m();
  full.bottomLeftCorner(m, n) = cross_k;
  full.topRightCorner(n, m) = cross_k.transpose();
  full.bottomRightCorner(m, m) = 0.5 * (test_k + test_k.transpose());
  return SymmetricMatrix(full);
}

namespace {

struct CellOutcome {
  CvCell cell;
  std::string warnings;
};

}  // namespace

CvResult cross_validate(const ExperimentConfig& cfg, const LabeledDataset& train,
                        const SymmetricMatrix& kernel) {
  cfg.validate();
  if (kernel.size() != train.size()) {
    throw ValidationError("kernel size does not match the dataset");
  }
  const std::vector<std::vector<Eigen::Index>> folds =
      stratified_folds(train.labels, cfg.folds, cfg.seed);

  // Complementary training indices per fold, fixed up front.
  std::vector<std::vector<Eigen::Index>> train_sets(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g == f) continue;
      train_sets[f].insert(train_sets[f].end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_sets[f].begin(), train_sets[f].end());
  }

  const std::vector<double> rho_grid =
      uses_rho(cfg.method) ? cfg.rho_grid : std::vector<double>{0.0};
  const std::size_t cells = cfg.c_grid.size() * rho_grid.size();
  std::vector<CellOutcome> outcomes(cells);

  parallel_for(cells, [&](std::size_t cell_idx) {
    const double c = cfg.c_grid[cell_idx / rho_grid.size()];
    const double rho = rho_grid[cell_idx % rho_grid.size()];
    CellOutcome& out = outcomes[cell_idx];
    out.cell.c = c;
    out.cell.rho = rho;
    double sum_average = 0.0;
    int used = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& test_idx = folds[f];
      const auto& train_idx = train_sets[f];
      if (test_idx.empty()) {
        out.warnings += "warning: fold " + std::to_string(f + 1) + " at c=" + fmt_full(c) +
                        " rho=" + fmt_full(rho) + " skipped: empty test side\n";
        continue;
      }
      const Vector y_sub = train.labels(train_idx);
      if ((y_sub.array() > 0).all() || (y_sub.array() < 0).all()) {
        out.warnings += "warning: fold " + std::to_string(f + 1) + " at c=" + fmt_full(c) +
                        " rho=" + fmt_full(rho) + " skipped: single-class training side\n";
        continue;
      }
      const SymmetricMatrix k_sub(Matrix(kernel.m()(train_idx, train_idx)));
      const Matrix cross = kernel.m()(test_idx, train_idx);
      const Matrix test_block = kernel.m()(test_idx, test_idx);
      const TrainedModel model = train_method(cfg, k_sub, y_sub, c, rho);
      const SymmetricMatrix full =
          assemble_test_kernel(cfg.method, k_sub, cross, test_block, model);
      std::vector<Eigen::Index> eval_idx(test_idx.size());
      const Eigen::Index n_sub = static_cast<Eigen::Index>(train_idx.size());
      for (std::size_t t = 0; t < test_idx.size(); ++t) {
        eval_idx[t] = n_sub + static_cast<Eigen::Index>(t);
      }
      const Vector preds = predict(model, full, eval_idx);
      const Metrics metrics = compute_metrics(preds, train.labels(test_idx));
      sum_average += metrics.average;
      ++used;
    }
    out.cell.folds_used = used;
    out.cell.mean_average = used > 0 ? sum_average / used : 0.0;
  });

  CvResult result;
  result.table.reserve(cells);
  for (const CellOutcome& out : outcomes) {
    if (!out.warnings.empty()) std::cerr << out.warnings;
    result.table.push_back(out.cell);
  }
  for (const CvCell& cell : result.table) {
    if (cell.folds_used == 0) {
      throw ValidationError("every fold was skipped at c=" + fmt_full(cell.c) +
                            " rho=" + fmt_full(cell.rho) +
                            "; check class balance and fold count");
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const CvCell& cand = result.table[i];
    const CvCell& cur = result.table[best];
    if (cand.mean_average > cur.mean_average) {
      best = i;
    } else if (cand.mean_average == cur.mean_average) {
      if (cand.c < cur.c || (cand.c == cur.c && cand.rho > cur.rho)) best = i;
    }
  }
  result.best_c = result.table[best].c;
  result.best_rho = result.table[best].rho;
  return result;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

Matrix binarize(const Matrix& features, double threshold) {
  return (features.array() > threshold).cast<double>().matrix();
}

namespace {

LabeledDataset load_for_experiment(const ExperimentConfig& cfg, const std::string& path) {
  LabeledDataset data = load_dataset(path, cfg.format);
  if (cfg.kernel.family == KernelFamily::kSimpson) {
    return make_dataset(binarize(data.features, cfg.binarize_threshold), data.labels);
  }
  return data;
}

void write_experiment_files(const ExperimentConfig& cfg, const ExperimentReport& report) {
  const std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");

  {
    std::ofstream out = open_for_write((dir / "cv.csv").string());
    out << "c,rho,mean_average,folds_used\n";
    for (const CvCell& cell : report.cv.table) {
      out << fmt_full(cell.c) << ',' << fmt_full(cell.rho) << ','
          << fmt_full(cell.mean_average) << ',' << cell.folds_used << '\n';
    }
  }
  if (report.has_test_metrics) {
    std::ofstream out = open_for_write((dir / "metrics.csv").string());
    out << "method,accuracy,recall,average\n";
    out << to_string(cfg.method) << ',' << fmt_pct(report.test_metrics.accuracy) << ','
        << fmt_pct(report.test_metrics.recall) << ',' << fmt_pct(report.test_metrics.average)
        << '\n';
  }
  {
    std::ofstream out = open_for_write((dir / "trace.csv").string());
    out << "iteration,objective,upper_bound,gap,seconds\n";
    for (const TraceRow& row : report.model.trace.rows) {
      out << row.iteration << ',' << fmt_full(row.objective) << ','
          << fmt_full(row.upper_bound) << ',' << fmt_full(row.gap) << ','
          << fmt_full(row.seconds) << '\n';
    }
  }
  {
    std::ofstream out = open_for_write((dir / "summary.txt").string());
    out << "method=" << to_string(cfg.method) << '\n';
    out << "kernel=" << cfg.kernel.to_string() << '\n';
    out << "train_points=" << report.model.alpha.size() << '\n';
    out << "lambda_min=" << fmt_full(report.lambda_min) << '\n';
    out << "lambda_max=" << fmt_full(report.lambda_max) << '\n';
    out << "best_c=" << fmt_full(report.cv.best_c) << '\n';
    out << "best_rho=" << fmt_full(report.cv.best_rho) << '\n';
    out << "objective=" << fmt_full(report.model.objective) << '\n';
    out << "gap=" << fmt_full(report.model.gap) << '\n';
    out << "status=" << status_to_string(report.model.status) << '\n';
    if (report.has_test_metrics) {
      out << "test_accuracy=" << fmt_pct(report.test_metrics.accuracy) << '\n';
      out << "test_recall=" << fmt_pct(report.test_metrics.recall) << '\n';
      out << "test_average=" << fmt_pct(report.test_metrics.average) << '\n';
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LabeledDataset train = load_for_experiment(cfg, cfg.train_path);

  SymmetricMatrix kernel;
  if (cfg.kernel.family == KernelFamily::kPrecomputed) {
    if (!cfg.test_path.empty()) {
      throw ValidationError(
          "precomputed kernels cover the training set only and cannot score a separate "
          "test set; predict with an assembled full kernel instead");
    }
    kernel = load_kernel(cfg.kernel.path);
    if (kernel.size() != train.size()) {
      throw ValidationError("precomputed kernel size does not match the dataset");
    }
  } else {
    kernel = gram(train.features, cfg.kernel);
  }

  ExperimentReport report;
  const EigenSystem es = eig(kernel);
  report.lambda_min = es.values[0];
  report.lambda_max = es.values[es.n() - 1];

  report.cv = cross_validate(cfg, train, kernel);
  report.model = train_method(cfg, kernel, train.labels, report.cv.best_c,
                              report.cv.best_rho);

  if (!cfg.test_path.empty()) {
    const LabeledDataset test = load_for_experiment(cfg, cfg.test_path);
    if (test.features.cols() != train.features.cols()) {
      throw ValidationError("train/test feature dimensions differ");
    }
    const Matrix cross = cross_gram(test.features, train.features, cfg.kernel);
    const Matrix test_block = gram(test.features, cfg.kernel).m();
    const SymmetricMatrix full =
        assemble_test_kernel(cfg.method, kernel, cross, test_block, report.model);
    std::vector<Eigen::Index> eval_idx(static_cast<std::size_t>(test.size()));
    for (Eigen::Index t = 0; t < test.size(); ++t) {
      eval_idx[static_cast<std::size_t>(t)] = train.size() + t;
    }
    const Vector preds = predict(report.model, full, eval_idx);
    report.test_metrics = compute_metrics(preds, test.labels);
    report.has_test_metrics = true;
  }

  if (!cfg.out_dir.empty()) write_experiment_files(cfg, report);
  return report;
}

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

void save_model(const std::string& path, const ModelFile& mf) {
  std::ofstream out = open_for_write(path);
  out << "iksvm-model-v1\n";
  out << "method=" << to_string(mf.method) << '\n';
  out << "kernel=" << mf.kernel.to_string() << '\n';
  out << "binarize_threshold=" << fmt_full(mf.binarize_threshold) << '\n';
  out << "variant=" << variant_to_string(mf.model.variant) << '\n';
  out << "c=" << fmt_full(mf.model.penalty_c) << '\n';
  out << "rho=" << fmt_full(mf.model.rho) << '\n';
  out << "projected=" << (mf.model.projected ? 1 : 0) << '\n';
  out << "bias=" << fmt_full(mf.model.bias) << '\n';
  out << "objective=" << fmt_full(mf.model.objective) << '\n';
  out << "gap=" << fmt_full(mf.model.gap) << '\n';
  out << "status=" << status_to_string(mf.model.status) << '\n';
  out << "alpha=" << join_numbers(mf.model.alpha) << '\n';
  out << "labels=" << join_numbers(mf.model.labels) << '\n';
  out << "update_vector=" << join_numbers(mf.model.update_vector) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "iksvm-model-v1") {
    throw ValidationError(path + ": not a model file (bad header)");
  }
  ModelFile mf;
  long line_no = 1;
  bool saw_alpha = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key=value");
    const std::string key = text.substr(0, eq);
    const std::string val = text.substr(eq + 1);
    if (key == "method") {
      mf.method = method_from_string(val);
    } else if (key == "kernel") {
      mf.kernel = KernelSpec::parse(val);
    } else if (key == "binarize_threshold") {
      mf.binarize_threshold = parse_number(val, where);
    } else if (key == "variant") {
      mf.model.variant = variant_from_string(val);
    } else if (key == "c") {
      mf.model.penalty_c = parse_number(val, where);
    } else if (key == "rho") {
      mf.model.rho = parse_number(val, where);
    } else if (key == "projected") {
      mf.model.projected = parse_integer(val, where) != 0;
    } else if (key == "bias") {
      mf.model.bias = parse_number(val, where);
    } else if (key == "objective") {
      mf.model.objective = parse_number(val, where);
    } else if (key == "gap") {
      mf.model.gap = parse_number(val, where);
    } else if (key == "status") {
      mf.model.status = status_from_string(val);
    } else if (key == "alpha") {
      mf.model.alpha = parse_number_list(val, where);
      saw_alpha = true;
    } else if (key == "labels") {
      mf.model.labels = parse_number_list(val, where);
    } else if (key == "update_vector") {
      mf.model.update_vector = parse_number_list(val, where);
    } else {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
  if (!saw_alpha || mf.model.alpha.size() == 0) {
    throw ValidationError(path + ": model has no coefficients");
  }
  if (mf.model.labels.size() != 0 && mf.model.labels.size() != mf.model.alpha.size()) {
    throw ValidationError(path + ": label/coefficient length mismatch");
  }
  if (mf.model.update_vector.size() != 0 &&
      mf.model.update_vector.size() != mf.model.alpha.size()) {
    throw ValidationError(path + ": update-vector length mismatch");
  }
  return mf;
}

}  // namespace iksvm
