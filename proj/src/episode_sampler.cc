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

#include "fsosr/episode_sampler.h"

#include <cstring>
#include <numeric>
#include <string>

#include "fsosr/philox.h"

namespace fsosr {
namespace {

constexpr uint32_t kEpisodeStream = 0x45504953;  // "EPIS"

// Moves `count` uniformly chosen elements to the front of `items`
// (partial Fisher-Yates).
template <typename T>
void PartialShuffle(std::vector<T>& items, size_t count, Philox& rng) {
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + rng.Uniform(items.size() - i);
    std::swap(items[i], items[j]);
  }
}

void CopyRow(const FeatureSet& fs, int64_t row, Matrix& dst, int dst_row) {
  const auto r = fs.row(row);
  for (int d = 0; d < fs.dim(); ++d) dst(dst_row, d) = r[d];
}

}  // namespace

void EpisodeSpec::Validate() const {
  if (n_way < 2) throw ConfigError("n_way must be >= 2");
  if (n_shot < 1) throw ConfigError("n_shot must be >= 1");
  if (n_query_per_class < 1) {
    throw ConfigError("n_query_per_class must be >= 1");
  }
  if (n_open_classes < 1) throw ConfigError("n_open_classes must be >= 1");
}

std::vector<bool> Episode::OutlierMask() const {
  std::vector<bool> mask(query_truth.size());
  for (size_t i = 0; i < query_truth.size(); ++i) {
    mask[i] = query_truth[i] == kOutlier;
  }
  return mask;
}

int Episode::NumInliers() const {
  int n = 0;
  for (const int t : query_truth) n += t != kOutlier;
  return n;
}

uint64_t Episode::Checksum() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < size; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  mix(support.data(), sizeof(double) * support.size());
  mix(query.data(), sizeof(double) * query.size());
  mix(support_labels.data(), sizeof(int) * support_labels.size());
  mix(query_truth.data(), sizeof(int) * query_truth.size());
  return h;
}

Episode SampleEpisode(const FeatureSet& fs, const EpisodeSpec& spec,
                      uint64_t episode_index, Split split) {
  spec.Validate();
  std::vector<int> classes = fs.ClassesIn(split);
  const size_t needed = static_cast<size_t>(spec.n_way + spec.n_open_classes);
  if (classes.size() < needed) {
    throw DataError(std::string(SplitName(split)) + " split has " +
                    std::to_string(classes.size()) + " classes, episode needs " +
                    std::to_string(needed));
  }

  Philox rng(spec.seed, episode_index, kEpisodeStream);
  PartialShuffle(classes, needed, rng);
  classes.resize(needed);

  const int k = spec.n_way;
  const int dim = fs.dim();
  Episode ep;
  ep.n_way = k;
  ep.source_classes = classes;
  ep.support.resize(k * spec.n_shot, dim);
  ep.query.resize(static_cast<Eigen::Index>(needed) * spec.n_query_per_class,
                  dim);

  int s_row = 0;
  int q_row = 0;
  for (size_t slot = 0; slot < needed; ++slot) {
    const int cls = classes[slot];
    const bool closed = static_cast<int>(slot) < k;
    const int n_support = closed ? spec.n_shot : 0;
    const int n_take = n_support + spec.n_query_per_class;
    std::vector<int64_t> rows = fs.members(cls);
    if (static_cast<int>(rows.size()) < n_take) {
      throw DataError("class " + std::to_string(cls) + " ('" +
                      fs.class_names()[cls] + "') has " +
                      std::to_string(rows.size()) + " vectors, episode needs " +
                      std::to_string(n_take));
    }
    PartialShuffle(rows, static_cast<size_t>(n_take), rng);
    for (int i = 0; i < n_support; ++i) {
      CopyRow(fs, rows[i], ep.support, s_row++);
      ep.support_labels.push_back(static_cast<int>(slot));
      ep.support_rows.push_back(rows[i]);
    }
    for (int i = n_support; i < n_take; ++i) {
      CopyRow(fs, rows[i], ep.query, q_row++);
      ep.query_truth.push_back(closed ? static_cast<int>(slot) : kOutlier);
      ep.query_rows.push_back(rows[i]);
    }
  }
  return ep;
}

}  // namespace fsosr
