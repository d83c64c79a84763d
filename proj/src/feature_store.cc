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

#include "fsosr/feature_store.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace fsosr {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'F', 'S', 'O', 'S'};
constexpr size_t kHeaderBytes = 4 + 4 + 4 + 8 + 4;

[[noreturn]] void Fail(StoreErrorKind kind, const std::string& what) {
  throw StoreError(kind, what);
}

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutU64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t GetU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint64_t GetU64(const uint8_t* p) {
  return static_cast<uint64_t>(GetU32(p)) |
         static_cast<uint64_t>(GetU32(p + 4)) << 32;
}

uint32_t Crc32(const uint8_t* data, size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for payloads above 4 GiB.
  constexpr size_t kChunk = 1u << 30;
  while (size > 0) {
    const size_t n = std::min(size, kChunk);
    crc = crc32(crc, data, static_cast<uInt>(n));
    data += n;
    size -= n;
  }
  return static_cast<uint32_t>(crc);
}

json SidecarJson(const FeatureSet& fs) {
  json splits = {{"base", json::array()}, {"val", json::array()},
                 {"test", json::array()}};
  for (int c = 0; c < fs.num_classes(); ++c) {
    splits[SplitName(fs.split_of_class()[c])].push_back(c);
  }
  return {{"class_names", fs.class_names()}, {"splits", splits}};
}

// Parses sidecar/split-file JSON. `num_classes` < 0 means "infer from names".
void ParseSidecar(const json& doc, int num_classes, const std::string& origin,
                  std::vector<std::string>* names, std::vector<Split>* splits) {
  try {
    if (doc.contains("class_names")) {
      *names = doc.at("class_names").get<std::vector<std::string>>();
    }
    if (num_classes >= 0) {
      if (names->empty()) {
        for (int c = 0; c < num_classes; ++c) {
          names->push_back("class_" + std::to_string(c));
        }
      }
      if (static_cast<int>(names->size()) != num_classes) {
        Fail(StoreErrorKind::kBadSidecar,
             origin + ": " + std::to_string(names->size()) +
                 " class names for " + std::to_string(num_classes) +
                 " classes");
      }
    }
    const int c_total = static_cast<int>(names->size());
    std::vector<int> assigned(c_total, -1);
    const json& split_doc = doc.at("splits");
    for (const auto& [key, ids] : split_doc.items()) {
      const Split split = ParseSplit(key);
      for (const int id : ids.get<std::vector<int>>()) {
        if (id < 0 || id >= c_total) {
          Fail(StoreErrorKind::kBadSidecar,
               origin + ": split '" + key + "' references unknown class " +
                   std::to_string(id));
        }
        if (assigned[id] >= 0) {
          Fail(StoreErrorKind::kBadSidecar,
               origin + ": class " + std::to_string(id) +
                   " is assigned to more than one split");
        }
        assigned[id] = static_cast<int>(split);
      }
    }
    splits->clear();
    for (int c = 0; c < c_total; ++c) {
      if (assigned[c] < 0) {
        Fail(StoreErrorKind::kBadSidecar,
             origin + ": class " + std::to_string(c) + " has no split");
      }
      splits->push_back(static_cast<Split>(assigned[c]));
    }
  } catch (const json::exception& e) {
    Fail(StoreErrorKind::kBadSidecar, origin + ": " + e.what());
  } catch (const ConfigError& e) {
    Fail(StoreErrorKind::kBadSidecar, origin + ": " + e.what());
  }
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    Fail(StoreErrorKind::kIo, "cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    Fail(StoreErrorKind::kBadSidecar, path.string() + ": " + e.what());
  }
}

}  // namespace

const char* SplitName(Split split) {
  switch (split) {
    case Split::kBase:
      return "base";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& name) {
  if (name == "base") return Split::kBase;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "'");
}

FeatureSet::FeatureSet(int dim, std::vector<float> vectors,
                       std::vector<int32_t> labels,
                       std::vector<std::string> class_names,
                       std::vector<Split> split_of_class)
    : dim_(dim),
      vectors_(std::move(vectors)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      split_of_class_(std::move(split_of_class)) {
  if (dim_ <= 0) {
    Fail(StoreErrorKind::kBadHeader, "dimension must be positive");
  }
  if (vectors_.size() != labels_.size() * static_cast<size_t>(dim_)) {
    Fail(StoreErrorKind::kBadHeader,
         "vector payload holds " + std::to_string(vectors_.size()) +
             " values, expected " + std::to_string(labels_.size()) + " x " +
             std::to_string(dim_));
  }
  if (split_of_class_.size() != class_names_.size()) {
    Fail(StoreErrorKind::kBadSidecar,
         "split assignment covers " + std::to_string(split_of_class_.size()) +
             " classes, expected " + std::to_string(class_names_.size()));
  }
  const int c_total = num_classes();
  members_.assign(c_total, {});
  for (int64_t i = 0; i < size(); ++i) {
    const int32_t label = labels_[i];
    if (label < 0 || label >= c_total) {
      Fail(StoreErrorKind::kLabelOutOfRange,
           "vector " + std::to_string(i) + " has label " +
               std::to_string(label) + " outside [0, " +
               std::to_string(c_total) + ")");
    }
    for (const float v : row(i)) {
      if (!std::isfinite(v)) {
        Fail(StoreErrorKind::kNonFinite,
             "vector " + std::to_string(i) + " has a non-finite component");
      }
    }
    members_[label].push_back(i);
  }
  for (int c = 0; c < c_total; ++c) {
    if (members_[c].empty()) {
      Fail(StoreErrorKind::kEmptyClass,
           "class " + std::to_string(c) + " ('" + class_names_[c] +
               "') has no vectors");
    }
  }
}

Eigen::VectorXd FeatureSet::RowAsVector(int64_t i) const {
  const auto r = row(i);
  Eigen::VectorXd out(dim_);
  for (int d = 0; d < dim_; ++d) out[d] = r[d];
  return out;
}

std::vector<int> FeatureSet::ClassesIn(Split split) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes(); ++c) {
    if (split_of_class_[c] == split) out.push_back(c);
  }
  return out;
}

bool FeatureSet::operator==(const FeatureSet& other) const {
  if (dim_ != other.dim_ || labels_ != other.labels_ ||
      class_names_ != other.class_names_ ||
      split_of_class_ != other.split_of_class_ ||
      vectors_.size() != other.vectors_.size()) {
    return false;
  }
  // Bitwise comparison keeps -0.0 and +0.0 distinct.
  return std::equal(vectors_.begin(), vectors_.end(), other.vectors_.begin(),
                    [](float a, float b) {
                      return std::bit_cast<uint32_t>(a) ==
                             std::bit_cast<uint32_t>(b);
                    });
}

std::filesystem::path SidecarPath(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

void SaveFeatureStore(const FeatureSet& fs, const std::filesystem::path& path) {
  const size_t dim = static_cast<size_t>(fs.dim());
  const size_t n = static_cast<size_t>(fs.size());
  std::vector<uint8_t> bytes;
  bytes.reserve(kHeaderBytes + n * (4 + 4 * dim) + 4);
  bytes.insert(bytes.end(), std::begin(kMagic), std::end(kMagic));
  PutU32(bytes, kStoreVersion);
  PutU32(bytes, static_cast<uint32_t>(dim));
  PutU64(bytes, n);
  PutU32(bytes, static_cast<uint32_t>(fs.num_classes()));
  for (size_t i = 0; i < n; ++i) {
    PutU32(bytes, static_cast<uint32_t>(fs.labels()[i]));
    for (const float v : fs.row(static_cast<int64_t>(i))) {
      PutU32(bytes, std::bit_cast<uint32_t>(v));
    }
  }
  PutU32(bytes, Crc32(bytes.data() + kHeaderBytes, bytes.size() - kHeaderBytes));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) Fail(StoreErrorKind::kIo, "failed writing " + path.string());

  std::ofstream meta(SidecarPath(path), std::ios::trunc);
  meta << SidecarJson(fs).dump(2) << "\n";
  meta.close();
  if (!meta) {
    Fail(StoreErrorKind::kIo, "failed writing " + SidecarPath(path).string());
  }
}

FeatureSet LoadFeatureStore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(StoreErrorKind::kIo, "cannot open " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";

  if (bytes.size() < kHeaderBytes) {
    Fail(StoreErrorKind::kTruncated,
         where + "file is " + std::to_string(bytes.size()) +
             " bytes, shorter than the " + std::to_string(kHeaderBytes) +
             "-byte header");
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    Fail(StoreErrorKind::kBadMagic, where + "bad magic at byte offset 0");
  }
  const uint32_t version = GetU32(&bytes[4]);
  if (version != kStoreVersion) {
    Fail(StoreErrorKind::kBadVersion,
         where + "unsupported version " + std::to_string(version) +
             " at byte offset 4");
  }
  const uint32_t dim = GetU32(&bytes[8]);
  const uint64_t n = GetU64(&bytes[12]);
  const uint32_t c_total = GetU32(&bytes[20]);
  if (dim == 0 || dim > (1u << 24)) {
    Fail(StoreErrorKind::kBadHeader,
         where + "invalid dimension " + std::to_string(dim) +
             " at byte offset 8");
  }
  if (c_total == 0) {
    Fail(StoreErrorKind::kBadHeader,
         where + "class count is zero at byte offset 20");
  }
  const uint64_t record_bytes = 4 + 4 * static_cast<uint64_t>(dim);
  const uint64_t body = bytes.size() - kHeaderBytes;
  if (n > body / record_bytes + 1) {
    // Guards the multiplication below against overflow on absurd headers.
    Fail(StoreErrorKind::kTruncated,
         where + "header declares " + std::to_string(n) +
             " records but the file holds at most " +
             std::to_string(body / record_bytes));
  }
  const uint64_t expected = kHeaderBytes + n * record_bytes + 4;
  if (bytes.size() < expected) {
    // With the trailing CRC in place, the complete records are the ones that
    // fit before the last four bytes.
    const uint64_t complete =
        body >= 4 ? std::min<uint64_t>((body - 4) / record_bytes, n) : 0;
    Fail(StoreErrorKind::kTruncated,
         where + "header declares " + std::to_string(n) +
             " records but the payload ends in record " +
             std::to_string(complete + 1) + " (byte offset " +
             std::to_string(kHeaderBytes + complete * record_bytes) + ")");
  }
  if (bytes.size() > expected) {
    Fail(StoreErrorKind::kTrailingBytes,
         where + std::to_string(bytes.size() - expected) +
             " unexpected bytes after the checksum at byte offset " +
             std::to_string(expected));
  }
  const uint64_t payload_size = n * record_bytes;
  const uint32_t stored_crc = GetU32(&bytes[kHeaderBytes + payload_size]);
  const uint32_t actual_crc = Crc32(&bytes[kHeaderBytes], payload_size);
  if (stored_crc != actual_crc) {
    Fail(StoreErrorKind::kChecksum,
         where + "CRC32 mismatch at byte offset " +
             std::to_string(kHeaderBytes + payload_size));
  }

  std::vector<int32_t> labels(n);
  std::vector<float> vectors(n * dim);
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t offset = kHeaderBytes + i * record_bytes;
    const uint32_t label = GetU32(&bytes[offset]);
    if (label >= c_total) {
      Fail(StoreErrorKind::kLabelOutOfRange,
           where + "record " + std::to_string(i) + " has label " +
               std::to_string(label) + " >= C=" + std::to_string(c_total) +
               " at byte offset " + std::to_string(offset));
    }
    labels[i] = static_cast<int32_t>(label);
    for (uint32_t d = 0; d < dim; ++d) {
      const float v = std::bit_cast<float>(GetU32(&bytes[offset + 4 + 4 * d]));
      if (!std::isfinite(v)) {
        Fail(StoreErrorKind::kNonFinite,
             where + "vector " + std::to_string(i) +
                 " has a non-finite component " + std::to_string(d) +
                 " at byte offset " + std::to_string(offset + 4 + 4 * d));
      }
      vectors[i * dim + d] = v;
    }
  }

  std::vector<std::string> names;
  std::vector<Split> splits;
  const auto sidecar = SidecarPath(path);
  if (!std::filesystem::exists(sidecar)) {
    Fail(StoreErrorKind::kBadSidecar, "missing sidecar " + sidecar.string());
  }
  ParseSidecar(ReadJsonFile(sidecar), static_cast<int>(c_total),
               sidecar.string(), &names, &splits);
  return FeatureSet(static_cast<int>(dim), std::move(vectors),
                    std::move(labels), std::move(names), std::move(splits));
}

Eigen::VectorXd BaseMean(const FeatureSet& fs) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(fs.dim());
  int64_t count = 0;
  for (const int c : fs.ClassesIn(Split::kBase)) {
    for (const int64_t i : fs.members(c)) {
      const auto r = fs.row(i);
      for (int d = 0; d < fs.dim(); ++d) sum[d] += r[d];
      ++count;
    }
  }
  if (count == 0) {
    throw DataError("feature store has no base-split vectors");
  }
  return sum / static_cast<double>(count);
}

FeatureSet IngestCsv(const std::filesystem::path& csv_path,
                     const std::filesystem::path& split_path) {
  std::ifstream in(csv_path);
  if (!in) Fail(StoreErrorKind::kIo, "cannot open " + csv_path.string());

  int dim = -1;
  std::vector<float> vectors;
  std::vector<int32_t> labels;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const size_t comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const std::string loc = csv_path.string() + ":" + std::to_string(line_no);
    int32_t label = 0;
    const auto& lf = fields[0];
    if (std::from_chars(lf.data(), lf.data() + lf.size(), label).ec !=
        std::errc()) {
      // A non-numeric first line is a header row.
      if (line_no == 1) continue;
      Fail(StoreErrorKind::kBadHeader, loc + ": bad label '" +
                                           std::string(lf) + "'");
    }
    const int row_dim = static_cast<int>(fields.size()) - 1;
    if (dim < 0) dim = row_dim;
    if (row_dim != dim || dim == 0) {
      Fail(StoreErrorKind::kBadHeader,
           loc + ": expected " + std::to_string(dim) + " features, got " +
               std::to_string(row_dim));
    }
    for (int d = 0; d < dim; ++d) {
      const auto& f = fields[d + 1];
      float v = 0.0f;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        Fail(StoreErrorKind::kBadHeader,
             loc + ": bad feature value '" + std::string(f) + "'");
      }
      vectors.push_back(v);
    }
    labels.push_back(label);
  }
  if (labels.empty()) {
    Fail(StoreErrorKind::kBadHeader, csv_path.string() + ": no data rows");
  }
  std::vector<std::string> names;
  std::vector<Split> splits;
  const json doc = ReadJsonFile(split_path);
  int num_classes = -1;
  if (!doc.contains("class_names")) {
    num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  }
  ParseSidecar(doc, num_classes, split_path.string(), &names, &splits);
  return FeatureSet(dim, std::move(vectors), std::move(labels),
                    std::move(names), std::move(splits));
}

}  // namespace fsosr
