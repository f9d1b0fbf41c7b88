#include "crm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace crm {
namespace {

std::vector<std::int64_t> sample_coords(std::int64_t n, int want, Rng& rng) {
  std::vector<std::int64_t> coords;
  if (n <= want) {
    coords.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      coords[static_cast<std::size_t>(i)] = i;
    }
    return coords;
  }
  // Sample without replacement; n is small enough for a shuffled prefix.
  std::vector<std::int64_t> all(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    all[static_cast<std::size_t>(i)] = i;
  }
  rng.shuffle(all);
  coords.assign(all.begin(), all.begin() + want);
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& forward,
                           ParamSet& params, const GradCheckOptions& options,
                           Rng& rng) {
  params.zero_grad();
  {
    Tape tape;
    Tensor loss = forward(tape);
    tape.backward(loss);
  }

  // Snapshot analytic gradients before the perturbation passes.
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.count());
  for (auto& item : params.items()) {
    const double* g = item.tensor.grad();
    std::vector<double> copy(g, g + item.tensor.numel());
    if (!options.corrupt_prefix.empty() &&
        item.name.rfind(options.corrupt_prefix, 0) == 0) {
      for (double& v : copy) {
        v *= options.corrupt_factor;
      }
    }
    analytic.push_back(std::move(copy));
  }

  auto eval = [&forward]() {
    Tape tape(false);
    return forward(tape).item();
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.count(); ++pi) {
    auto& item = params.items()[pi];
    GradCheckEntry entry;
    entry.name = item.name;
    const auto coords =
        sample_coords(item.tensor.numel(), options.samples_per_param, rng);
    for (const std::int64_t i : coords) {
      double* p = item.tensor.data();
      const double saved = p[i];
      p[i] = saved + options.epsilon;
      const double f_plus = eval();
      p[i] = saved - options.epsilon;
      const double f_minus = eval();
      p[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * options.epsilon);
      const double a = analytic[pi][static_cast<std::size_t>(i)];
      if (std::abs(a) + std::abs(numeric) < options.skip_threshold) {
        entry.skipped += 1;
        continue;
      }
      const double rel =
          std::abs(a - numeric) / std::max(std::abs(numeric), 1e-12);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      entry.checked += 1;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.checked += entry.checked;
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace crm
