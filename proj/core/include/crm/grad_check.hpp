#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crm/params.hpp"
#include "crm/random.hpp"
#include "crm/tensor.hpp"

namespace crm {

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Coordinates sampled per parameter tensor (all of them when the tensor is
  /// smaller).
  int samples_per_param = 16;
  /// Coordinates with |analytic| + |numeric| below this are skipped.
  double skip_threshold = 1e-8;
  /// Multiplies the analytic gradient of parameters whose name starts with
  /// corrupt_prefix; used to prove the checker catches wrong gradients.
  std::string corrupt_prefix;
  double corrupt_factor = 1.0;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;
  int checked = 0;

  bool passed(double tolerance = 1e-4) const { return max_rel_err < tolerance; }
};

/// Central-difference check of the gradients produced by `forward`.
///
/// `forward` must deterministically build a scalar loss on the given tape.
/// One recorded pass provides the analytic gradients; each sampled coordinate
/// is then perturbed by +/- epsilon and re-evaluated without recording. The
/// relative error of a coordinate is |analytic - numeric| / max(|numeric|,
/// 1e-12), so a gradient that is wrong by a factor of 2 reports an error
/// around 1.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& forward,
                           ParamSet& params, const GradCheckOptions& options,
                           Rng& rng);

}  // namespace crm
