#include "driftgate/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "driftgate/error.hpp"

namespace driftgate {

std::vector<EmbeddingRecord> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim == 0 || spec.classes == 0 || spec.patches_per_frame == 0) {
    throw InputError("synthetic spec needs positive dim, classes and patches_per_frame");
  }
  if (!(spec.imbalance > 0.0) || !(spec.spread >= 0.0) || !(spec.center_scale >= 0.0)) {
    throw InputError("synthetic spec has an invalid imbalance, spread or center scale");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centers(spec.classes, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    for (auto& x : c) x = spec.center_scale * normal(rng);
  }
  std::vector<double> weights(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    weights[c] = std::pow(spec.imbalance, static_cast<double>(c));
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  std::vector<EmbeddingRecord> out(spec.records);
  for (std::size_t i = 0; i < spec.records; ++i) {
    const std::size_t cls = pick(rng);
    auto& rec = out[i];
    rec.frame = i / spec.patches_per_frame;
    rec.patch = static_cast<std::uint32_t>(i % spec.patches_per_frame);
    rec.label = "c" + std::to_string(cls);
    rec.row = i;
    rec.vector.resize(spec.dim);
    for (std::uint32_t k = 0; k < spec.dim; ++k) {
      rec.vector[k] = static_cast<float>(centers[cls][k] + spec.spread * normal(rng));
    }
  }
  return out;
}

}  // namespace driftgate
