#pragma once

#include <string>
#include <vector>

#include "iksvm/kernels.hpp"
#include "iksvm/model.hpp"
#include "iksvm/types.hpp"

namespace iksvm {

// ---------------------------------------------------------------------------
// Dataset and kernel file I/O
// ---------------------------------------------------------------------------

enum class DatasetFormat { kSvmlight, kCsv };

DatasetFormat dataset_format_from_string(const std::string& name);
// ".csv" extension selects CSV, anything else the sparse text format.
DatasetFormat guess_dataset_format(const std::string& path);

// Sparse text format: one point per line, "label index:value ..." with
// 1-based indices; omitted indices are zero. CSV: label in the first column,
// features in the remaining columns. Labels must be in {-1, +1}; files using
// {0, 1} are mapped to {-1, +1} with a warning on stderr. Malformed content
// raises ValidationError naming the line; unreadable files raise IoError.
LabeledDataset load_dataset(const std::string& path, DatasetFormat format);

// Inverse of load_dataset; values are written with enough digits that a
// round-trip reproduces the dataset exactly.
void save_dataset(const std::string& path, const LabeledDataset& data,
                  DatasetFormat format);

// Kernel matrices travel as plain CSV, n rows of n values. Loading
// symmetrizes the matrix and warns on stderr when the largest asymmetry
// |K(i,j) - K(j,i)| exceeds 1e-8. Saving writes full precision.
SymmetricMatrix load_kernel(const std::string& path);
void save_kernel(const std::string& path, const SymmetricMatrix& k);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Two-class counts and the derived percentages. The positive class is label
// +1. accuracy = (TP+TN)/total, recall = TP/(TP+FN), average = their mean,
// all in percent. An actual set with no positives has recall 100 by
// convention (nothing to recover).
struct Metrics {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;
  double accuracy = 0.0;
  double recall = 0.0;
  double average = 0.0;
};

Metrics compute_metrics(const Vector& predicted, const Vector& actual);

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

// Training method selected on the command line: the three indefinite-kernel
// solvers, the rank-one perturbation variant, the three spectrum-repair
// baselines, and an SVM run directly on the (possibly indefinite) kernel.
enum class Method {
  kIndefinitePg,
  kIndefiniteAccpm,
  kIndefiniteExchange,
  kPerturb,
  kDenoise,
  kFlip,
  kShift,
  kDirectSvm,
};

Method method_from_string(const std::string& name);
std::string to_string(Method method);

// True for methods whose trained model carries a learned rank-one kernel
// update (test kernels are then assembled with full_kernel_for_testing);
// false for the baselines, which keep the original cross-kernel block.
bool uses_learned_kernel(Method method);
// True for methods that read the deviation penalty rho.
bool uses_rho(Method method);

struct ExperimentConfig {
  std::string train_path;
  std::string test_path;  // empty: no held-out evaluation
  DatasetFormat format = DatasetFormat::kSvmlight;
  KernelSpec kernel;
  Method method = Method::kIndefinitePg;
  std::vector<double> c_grid;
  std::vector<double> rho_grid;  // ignored by methods without rho
  int folds = 5;
  unsigned long seed = 0;
  double gap_tol = 1e-3;
  long max_iter = 0;      // 0: solver default
  double step_scale = 0;  // projected-gradient step constant; 0: default
  double smooth_eps = 0;  // spectrum-smoothing width; 0: scaled to the kernel
  double binarize_threshold = 0.5;  // feature cutoff for the overlap kernel
  std::string out_dir;

  // Parses a "key = value" text file ('#' starts a comment). Keys: train,
  // test, format, kernel, method, c_grid, rho_grid (comma-separated), folds,
  // seed, gap_tol, max_iter, step_c, smooth_eps, binarize_threshold, out.
  static ExperimentConfig from_file(const std::string& path);

  void validate() const;
};

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

// Index partition: every index appears in exactly one fold, and each fold's
// per-class count is within one sample of an even split of that class
// (shuffled per class by `seed`, dealt round-robin).
std::vector<std::vector<Eigen::Index>> stratified_folds(const Vector& labels, int folds,
                                                        unsigned long seed);

struct CvCell {
  double c = 0.0;
  double rho = 0.0;
  double mean_average = 0.0;  // mean test Average over usable folds, percent
  int folds_used = 0;
};

struct CvResult {
  std::vector<CvCell> table;  // grid order: c outer, rho inner
  double best_c = 0.0;
  double best_rho = 0.0;
};

// Grid search over c_grid x rho_grid scored by mean fold Average. Ties take
// the smaller C, then the larger rho, then the earlier grid position. Folds
// whose training side is single-class are skipped with a warning; a grid
// point with every fold skipped raises ValidationError.
CvResult cross_validate(const ExperimentConfig& cfg, const LabeledDataset& train,
                        const SymmetricMatrix& kernel);

// ---------------------------------------------------------------------------
// Single trainings and experiments
// ---------------------------------------------------------------------------

// Trains one model on the given kernel/labels with the method selected in
// `cfg` at (c, rho). The returned model predicts through predict() with a
// full kernel assembled per uses_learned_kernel.
TrainedModel train_method(const ExperimentConfig& cfg, const SymmetricMatrix& kernel,
                          const Vector& labels, double c, double rho);

// Assembles the symmetric (train+test) x (train+test) kernel used to score a
// model: learned-kernel methods rebuild the trained proxy on the assembled
// matrix; baselines keep the original blocks.
SymmetricMatrix assemble_test_kernel(Method method, const SymmetricMatrix& train_k,
                                     const Matrix& cross_k, const Matrix& test_k,
                                     const TrainedModel& model);

struct ExperimentReport {
  CvResult cv;
  TrainedModel model;
  double lambda_min = 0.0;  // spectrum of the loaded training kernel
  double lambda_max = 0.0;
  bool has_test_metrics = false;
  Metrics test_metrics;
};

// Full protocol: cross-validate on the training set, retrain at the selected
// parameters on all of it, and (when a test set is configured) score the
// held-out points. Writes cv.csv, metrics.csv (test set only), trace.csv,
// and summary.txt under cfg.out_dir when it is nonempty. Output is
// deterministic for a fixed seed except for the wall-time column of
// trace.csv.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

// A trained model plus everything needed to rebuild kernels at predict time.
struct ModelFile {
  TrainedModel model;
  KernelSpec kernel;
  Method method = Method::kIndefinitePg;
  double binarize_threshold = 0.5;
};

// Self-contained text format; numeric fields round-trip exactly.
void save_model(const std::string& path, const ModelFile& mf);
ModelFile load_model(const std::string& path);

// Clamps features to {0, 1} at the threshold; used before evaluating the
// binary-overlap kernel.
Matrix binarize(const Matrix& features, double threshold);

}  // namespace iksvm
