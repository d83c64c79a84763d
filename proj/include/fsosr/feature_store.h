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

#ifndef FSOSR_FEATURE_STORE_H_
#define FSOSR_FEATURE_STORE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fsosr/error.h"

namespace fsosr {

enum class Split : uint8_t { kBase, kVal, kTest };

const char* SplitName(Split split);
// Throws ConfigError on an unknown name.
Split ParseSplit(const std::string& name);

// Immutable table of labeled feature vectors. Vectors are stored row-major as
// float32, matching the on-disk payload. Construction validates every
// invariant; a FeatureSet that exists is valid.
class FeatureSet {
 public:
  FeatureSet(int dim, std::vector<float> vectors, std::vector<int32_t> labels,
             std::vector<std::string> class_names,
             std::vector<Split> split_of_class);

  int dim() const { return dim_; }
  int64_t size() const { return static_cast<int64_t>(labels_.size()); }
  int num_classes() const { return static_cast<int>(class_names_.size()); }

  std::span<const float> row(int64_t i) const {
    return {vectors_.data() + i * dim_, static_cast<size_t>(dim_)};
  }
  Eigen::VectorXd RowAsVector(int64_t i) const;

  const std::vector<float>& vectors() const { return vectors_; }
  const std::vector<int32_t>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<Split>& split_of_class() const { return split_of_class_; }

  // Instance indices of a class, ascending.
  const std::vector<int64_t>& members(int class_id) const {
    return members_[class_id];
  }
  // Class ids assigned to a split, ascending.
  std::vector<int> ClassesIn(Split split) const;

  bool operator==(const FeatureSet& other) const;

 private:
  int dim_;
  std::vector<float> vectors_;
  std::vector<int32_t> labels_;
  std::vector<std::string> class_names_;
  std::vector<Split> split_of_class_;
  std::vector<std::vector<int64_t>> members_;
};

// Failure classes reported by LoadFeatureStore / SaveFeatureStore.
enum class StoreErrorKind {
  kIo,
  kBadMagic,
  kBadVersion,
  kBadHeader,
  kTruncated,
  kTrailingBytes,
  kChecksum,
  kNonFinite,
  kLabelOutOfRange,
  kEmptyClass,
  kBadSidecar,
};

class StoreError : public DataError {
 public:
  StoreError(StoreErrorKind kind, const std::string& what)
      : DataError(what), kind_(kind) {}
  StoreErrorKind store_kind() const { return kind_; }

 private:
  StoreErrorKind kind_;
};

// Binary layout (little-endian):
//   "FSOS" | u32 version=1 | u32 D | u64 N | u32 C |
//   N x (u32 label, D x f32) | u32 CRC32 of the N records.
// Class names and split assignment live in "<path>.meta.json".
inline constexpr uint32_t kStoreVersion = 1;

std::filesystem::path SidecarPath(const std::filesystem::path& path);

FeatureSet LoadFeatureStore(const std::filesystem::path& path);
void SaveFeatureStore(const FeatureSet& fs, const std::filesystem::path& path);

// Arithmetic mean of every vector whose class is in the base split.
Eigen::VectorXd BaseMean(const FeatureSet& fs);

// Builds a FeatureSet from CSV rows `label,f0,...,f{D-1}` and a split file
// with the sidecar's JSON schema. Missing class names default to "class_<id>".
FeatureSet IngestCsv(const std::filesystem::path& csv_path,
                     const std::filesystem::path& split_path);

}  // namespace fsosr

#endif  // FSOSR_FEATURE_STORE_H_
