#pragma once

#include <vector>

#include "iksvm/types.hpp"

namespace iksvm {

// Which learning formulation a problem or trained model belongs to.
enum class Variant {
  kClassification,  // labeled two-class SVM, indefinite base kernel
  kSvr,             // epsilon-insensitive regression
  kOneClass,        // unsupervised support estimation
  kPerturb,         // PSD base kernel, rank-one perturbation only
  kWeighted,        // per-point penalty weights on kernel deviation
};

enum class SolverStatus {
  kConverged,       // duality gap fell below the requested tolerance
  kIterationLimit,  // iteration budget exhausted before the tolerance
};

// One row of a solver's convergence log, recorded each time a duality gap is
// evaluated.
struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double upper_bound = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
};

struct SolverTrace {
  std::vector<TraceRow> rows;
};

// Everything needed to describe a trained machine: support vector
// coefficients, labels (empty for variants without them), the learned-kernel
// description (base kernel side is kept by the caller; the rank-one direction,
// its scale, and whether a PSD projection applies are stored here), and the
// convergence record.
struct TrainedModel {
  Variant variant = Variant::kClassification;
  Vector alpha;
  Vector labels;
  double penalty_c = 1.0;
  double rho = 1.0;
  Vector update_vector;  // rank-one direction; learned kernel adds u u'/(4 rho)
  bool projected = true;
  double bias = 0.0;
  double objective = 0.0;
  double gap = 0.0;
  SolverStatus status = SolverStatus::kConverged;
  SolverTrace trace;
};

}  // namespace iksvm
