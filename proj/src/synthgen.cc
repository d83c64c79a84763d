/*
 * Copyright 2026 The fsosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fsosr/synthgen.h"

#include <cmath>
#include <string>

#include "fsosr/philox.h"

namespace fsosr {
namespace {

constexpr uint32_t kCentroidStream = 0x43454e54;  // "CENT"
constexpr uint32_t kPointStream = 0x504f4e54;     // "PONT"

}  // namespace

void SynthSpec::Validate() const {
  if (dim < 1) throw ConfigError("synth dim must be >= 1");
  if (n_classes < 1) throw ConfigError("synth n_classes must be >= 1");
  if (points_per_class < 1) {
    throw ConfigError("synth points_per_class must be >= 1");
  }
  if (!(centroid_radius > 0.0)) {
    throw ConfigError("synth centroid_radius must be positive");
  }
  if (!(within_std >= 0.0)) throw ConfigError("synth within_std must be >= 0");
  if (!global_shift.empty() && static_cast<int>(global_shift.size()) != dim) {
    throw ConfigError("synth global_shift must have dim entries");
  }
  for (const double f : {base_fraction, val_fraction, test_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ConfigError("synth split fractions must lie in [0, 1]");
    }
  }
  if (std::abs(base_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("synth split fractions must sum to 1");
  }
}

FeatureSet Generate(const SynthSpec& spec) {
  spec.Validate();
  const int dim = spec.dim;
  const int c_total = spec.n_classes;

  const int n_base = static_cast<int>(std::lround(spec.base_fraction * c_total));
  const int n_val = std::min(
      c_total - n_base, static_cast<int>(std::lround(spec.val_fraction * c_total)));
  std::vector<Split> splits(c_total, Split::kTest);
  std::vector<std::string> names(c_total);
  for (int c = 0; c < c_total; ++c) {
    if (c < n_base) {
      splits[c] = Split::kBase;
    } else if (c < n_base + n_val) {
      splits[c] = Split::kVal;
    }
    names[c] = "synth_" + std::to_string(c);
  }

  std::vector<float> vectors;
  vectors.reserve(static_cast<size_t>(c_total) * spec.points_per_class * dim);
  std::vector<int32_t> labels;
  std::vector<double> centroid(dim);
  for (int c = 0; c < c_total; ++c) {
    // Normalized Gaussian draws are uniform on the sphere.
    Philox centroid_rng(spec.seed, static_cast<uint64_t>(c), kCentroidStream);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int d = 0; d < dim; ++d) {
        centroid[d] = centroid_rng.Normal();
        norm += centroid[d] * centroid[d];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (int d = 0; d < dim; ++d) {
      const double shift = spec.global_shift.empty() ? 0.0 : spec.global_shift[d];
      centroid[d] = shift + spec.centroid_radius * centroid[d] / norm;
    }

    Philox point_rng(spec.seed, static_cast<uint64_t>(c), kPointStream);
    for (int p = 0; p < spec.points_per_class; ++p) {
      for (int d = 0; d < dim; ++d) {
        vectors.push_back(static_cast<float>(
            centroid[d] + spec.within_std * point_rng.Normal()));
      }
      labels.push_back(c);
    }
  }
  return FeatureSet(dim, std::move(vectors), std::move(labels),
                    std::move(names), std::move(splits));
}

}  // namespace fsosr
