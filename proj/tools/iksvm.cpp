// Command-line front end: train models on indefinite similarity matrices,
// cross-validate parameter grids, predict held-out points, and inspect or
// repair kernel spectra.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iksvm/bench.hpp"
#include "iksvm/kernels.hpp"
#include "iksvm/refqp.hpp"
#include "iksvm/symlin.hpp"
#include "iksvm/types.hpp"

namespace {

using namespace iksvm;

constexpr int kOk = 0;
constexpr int kUsageOrValidation = 2;
constexpr int kNotConverged = 3;
constexpr int kIoFailure = 4;

// Accepts either a kernel spec ("gaussian:gamma=0.5") or a bare path to a
// precomputed matrix file.
KernelSpec parse_kernel_arg(const std::string& text) {
  try {
    return KernelSpec::parse(text);
  } catch (const ValidationError&) {
    if (std::filesystem::exists(text)) return KernelSpec::parse("precomputed:" + text);
    throw;
  }
}

DatasetFormat resolve_format(const std::string& flag, const std::string& path) {
  return flag.empty() ? guess_dataset_format(path) : dataset_format_from_string(flag);
}

LabeledDataset load_features(const std::string& path, const std::string& format_flag,
                             const KernelSpec& kernel, double binarize_threshold) {
  LabeledDataset data = load_dataset(path, resolve_format(format_flag, path));
  if (kernel.family == KernelFamily::kSimpson) {
    return make_dataset(binarize(data.features, binarize_threshold), data.labels);
  }
  return data;
}

double parse_smooth_eps(const std::string& text) {
  if (text == "auto") return 0.0;
  try {
    const double v = std::stod(text);
    if (v <= 0.0) throw ValidationError("--smooth-eps must be positive or 'auto'");
    return v;
  } catch (const std::invalid_argument&) {
    throw ValidationError("--smooth-eps expects a number or 'auto', got '" + text + "'");
  }
}

struct TrainArgs {
  std::string kernel;
  std::string data;
  std::string format;
  std::string method = "indefinite-pg";
  double c = 1.0;
  double rho = 1.0;
  double gap_tol = 0.1;
  long max_iter = 2000;
  double step_c = 0.0;
  std::string smooth_eps = "auto";
  double binarize_threshold = 0.5;
  std::string out;
};

int run_train(const TrainArgs& args) {
  ExperimentConfig cfg;
  cfg.method = method_from_string(args.method);
  cfg.kernel = parse_kernel_arg(args.kernel);
  cfg.gap_tol = args.gap_tol;
  cfg.max_iter = args.max_iter;
  cfg.step_scale = args.step_c;
  cfg.smooth_eps = parse_smooth_eps(args.smooth_eps);
  cfg.binarize_threshold = args.binarize_threshold;

  const LabeledDataset data =
      load_features(args.data, args.format, cfg.kernel, cfg.binarize_threshold);
  SymmetricMatrix kernel;
  if (cfg.kernel.family == KernelFamily::kPrecomputed) {
    kernel = load_kernel(cfg.kernel.path);
    if (kernel.size() != data.size()) {
      throw ValidationError("precomputed kernel size does not match the dataset");
    }
  } else {
    kernel = gram(data.features, cfg.kernel);
  }

  ModelFile mf;
  mf.model = train_method(cfg, kernel, data.labels, args.c, args.rho);
  mf.kernel = cfg.kernel;
  mf.method = cfg.method;
  mf.binarize_threshold = cfg.binarize_threshold;
  save_model(args.out, mf);

  std::cout << "objective=" << mf.model.objective << "\n"
            << "gap=" << mf.model.gap << "\n"
            << "status="
            << (mf.model.status == SolverStatus::kConverged ? "converged"
                                                            : "iteration-limit")
            << "\n"
            << "model=" << args.out << "\n";
  if (mf.model.status != SolverStatus::kConverged) {
    std::cerr << "warning: iteration budget exhausted before the gap tolerance; "
                 "the model file holds the best iterate\n";
    return kNotConverged;
  }
  return kOk;
}

int run_cv(const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  const ExperimentReport report = run_experiment(cfg);
  std::cout << "best_c=" << report.cv.best_c << "\n"
            << "best_rho=" << report.cv.best_rho << "\n"
            << "lambda_min=" << report.lambda_min << "\n"
            << "lambda_max=" << report.lambda_max << "\n"
            << "objective=" << report.model.objective << "\n"
            << "gap=" << report.model.gap << "\n"
            << "status="
            << (report.model.status == SolverStatus::kConverged ? "converged"
                                                                : "iteration-limit")
            << "\n";
  if (report.has_test_metrics) {
    std::printf("test_accuracy=%.2f\ntest_recall=%.2f\ntest_average=%.2f\n",
                report.test_metrics.accuracy, report.test_metrics.recall,
                report.test_metrics.average);
  }
  if (!cfg.out_dir.empty()) std::cout << "outputs=" << cfg.out_dir << "\n";
  return report.model.status == SolverStatus::kConverged ? kOk : kNotConverged;
}

struct PredictArgs {
  std::string model;
  std::string train_data;
  std::string test_data;
  std::string format;
  std::string kernel_file;
  std::string out;
};

int run_predict(const PredictArgs& args) {
  const ModelFile mf = load_model(args.model);
  const Eigen::Index n = mf.model.alpha.size();

  SymmetricMatrix full;
  Vector test_labels;  // empty when unknown
  Eigen::Index m = 0;

  if (!args.kernel_file.empty()) {
    const SymmetricMatrix raw = load_kernel(args.kernel_file);
    if (raw.size() < n) {
      throw ValidationError("assembled kernel is smaller than the model's training set");
    }
    m = raw.size() - n;
    const SymmetricMatrix train_k(Matrix(raw.m().topLeftCorner(n, n)));
    const Matrix cross = raw.m().bottomLeftCorner(m, n);
    const Matrix test_block = raw.m().bottomRightCorner(m, m);
    full = assemble_test_kernel(mf.method, train_k, cross, test_block, mf.model);
  } else {
    if (args.train_data.empty() || args.test_data.empty()) {
      throw ValidationError(
          "predict needs --train-data and --test-data, or an assembled --kernel matrix");
    }
    const LabeledDataset train =
        load_features(args.train_data, args.format, mf.kernel, mf.binarize_threshold);
    const LabeledDataset test =
        load_features(args.test_data, args.format, mf.kernel, mf.binarize_threshold);
    if (train.size() != n) {
      throw ValidationError("training data size does not match the model");
    }
    if (mf.model.labels.size() == n && (train.labels - mf.model.labels).cwiseAbs().maxCoeff() != 0.0) {
      throw ValidationError("training data labels differ from the model's stored labels");
    }
    if (test.features.cols() != train.features.cols()) {
      throw ValidationError("train/test feature dimensions differ");
    }
    m = test.size();
    const SymmetricMatrix train_k = gram(train.features, mf.kernel);
    const Matrix cross = cross_gram(test.features, train.features, mf.kernel);
    const Matrix test_block = gram(test.features, mf.kernel).m();
    full = assemble_test_kernel(mf.method, train_k, cross, test_block, mf.model);
    test_labels = test.labels;
  }

  if (m == 0) std::cerr << "warning: no test points; writing an empty prediction file\n";
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t < m; ++t) idx[static_cast<std::size_t>(t)] = n + t;
  const Vector values = decision_values(mf.model, full, idx);
  const Vector labels = predict(mf.model, full, idx);

  std::ofstream out(args.out);
  if (!out) throw IoError("cannot open '" + args.out + "' for writing");
  out << "index,decision_value,label\n";
  for (Eigen::Index t = 0; t < m; ++t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", values[t]);
    out << t << ',' << buf << ',' << (labels[t] > 0 ? "+1" : "-1") << '\n';
  }
  if (!out) throw IoError("failed writing '" + args.out + "'");

  if (test_labels.size() == m && m > 0) {
    const Metrics metrics = compute_metrics(labels, test_labels);
    std::printf("accuracy=%.2f\nrecall=%.2f\naverage=%.2f\n", metrics.accuracy,
                metrics.recall, metrics.average);
  }
  std::cout << "predictions=" << args.out << "\n";
  return kOk;
}

int run_transform(const std::string& kernel_path, const std::string& mode,
                  const std::string& out) {
  const SymmetricMatrix k = load_kernel(kernel_path);
  save_kernel(out, spectral_transform(k, spectral_mode_from_string(mode)));
  std::cout << "written=" << out << "\n";
  return kOk;
}

int run_spectrum(const std::string& kernel_path) {
  const SymmetricMatrix k = load_kernel(kernel_path);
  const EigenSystem es = eig(k);
  std::printf("n=%ld\nlambda_min=%.17g\nlambda_max=%.17g\n", static_cast<long>(k.size()),
              es.values[0], es.values[es.n() - 1]);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SVM training on indefinite similarity matrices"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and write it to a file");
  train->add_option("--kernel", train_args.kernel,
                    "Kernel spec (linear, gaussian:gamma=G, sigmoid:a=A,b=B, simpson) or a "
                    "precomputed matrix file")
      ->required();
  train->add_option("--data", train_args.data, "Labeled dataset file")->required();
  train->add_option("--format", train_args.format, "Dataset format: svmlight or csv");
  train->add_option("--method", train_args.method,
                    "indefinite-pg | indefinite-accpm | indefinite-exchange | perturb | "
                    "denoise | flip | shift | direct-svm");
  train->add_option("-C", train_args.c, "Soft-margin penalty")->required();
  train->add_option("--rho", train_args.rho, "Kernel-deviation penalty");
  train->add_option("--gap-tol", train_args.gap_tol, "Duality-gap stopping tolerance");
  train->add_option("--max-iter", train_args.max_iter, "Outer iteration budget");
  train->add_option("--step-c", train_args.step_c,
                    "Gradient step constant c in c/k (default: 5, or 10 for perturb)");
  train->add_option("--smooth-eps", train_args.smooth_eps,
                    "Spectrum smoothing width, or 'auto'");
  train->add_option("--binarize-threshold", train_args.binarize_threshold,
                    "Feature cutoff applied before the simpson kernel");
  train->add_option("--out", train_args.out, "Output model file")->required();

  std::string cv_config;
  CLI::App* cv = app.add_subcommand(
      "cv", "Cross-validate a parameter grid and run the configured experiment");
  cv->add_option("--config", cv_config, "key = value configuration file")->required();

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Score test points with a saved model");
  predict->add_option("--model", predict_args.model, "Model file from train")->required();
  predict->add_option("--train-data", predict_args.train_data,
                      "Training dataset the model was fit on");
  predict->add_option("--test-data", predict_args.test_data, "Points to score");
  predict->add_option("--format", predict_args.format, "Dataset format: svmlight or csv");
  predict->add_option("--kernel", predict_args.kernel_file,
                      "Assembled (train+test) kernel matrix file; replaces the data options");
  predict->add_option("--out", predict_args.out, "Prediction CSV")->required();

  std::string transform_kernel, transform_mode, transform_out;
  CLI::App* transform =
      app.add_subcommand("transform", "Repair a kernel spectrum (denoise, flip, shift)");
  transform->add_option("--kernel", transform_kernel, "Kernel matrix file")->required();
  transform->add_option("--mode", transform_mode, "denoise | flip | shift")->required();
  transform->add_option("--out", transform_out, "Output matrix file")->required();

  std::string spectrum_kernel;
  CLI::App* spectrum =
      app.add_subcommand("spectrum", "Print a kernel's size and extreme eigenvalues");
  spectrum->add_option("--kernel", spectrum_kernel, "Kernel matrix file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageOrValidation;
  }

  try {
    if (train->parsed()) return run_train(train_args);
    if (cv->parsed()) return run_cv(cv_config);
    if (predict->parsed()) return run_predict(predict_args);
    if (transform->parsed()) {
      return run_transform(transform_kernel, transform_mode, transform_out);
    }
    if (spectrum->parsed()) return run_spectrum(spectrum_kernel);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageOrValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageOrValidation;
}
