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

#include "fsosr/diagnostics.h"

#include <algorithm>
#include <string>

#include "fsosr/error.h"

namespace fsosr {
namespace {

void RequireClasses(const LabeledPoints& points, int minimum) {
  if (points.num_classes() < minimum) {
    throw DataError("need at least " + std::to_string(minimum) +
                    " classes, got " + std::to_string(points.num_classes()));
  }
  std::vector<int> counts(points.num_classes(), 0);
  for (const int l : points.labels) ++counts[l];
  for (int c = 0; c < points.num_classes(); ++c) {
    if (counts[c] == 0) {
      throw DataError("class " + std::to_string(points.class_ids[c]) +
                      " is empty");
    }
  }
}

}  // namespace

LabeledPoints ExtractSplit(const FeatureSet& fs, Split split) {
  LabeledPoints out;
  out.class_ids = fs.ClassesIn(split);
  int64_t n = 0;
  for (const int c : out.class_ids) n += static_cast<int64_t>(fs.members(c).size());
  out.x.resize(n, fs.dim());
  int64_t row = 0;
  for (size_t j = 0; j < out.class_ids.size(); ++j) {
    for (const int64_t i : fs.members(out.class_ids[j])) {
      out.x.row(row++) = fs.RowAsVector(i).transpose();
      out.labels.push_back(static_cast<int>(j));
    }
  }
  return out;
}

double ImpostureFactor(const Vector& z, const Matrix& class_members,
                       const Vector& centroid) {
  if (class_members.rows() == 0) {
    throw DataError("imposture factor of an empty class");
  }
  const double dz = (z - centroid).norm();
  int64_t farther = 0;
  for (Eigen::Index i = 0; i < class_members.rows(); ++i) {
    farther += (class_members.row(i).transpose() - centroid).norm() > dz;
  }
  return static_cast<double>(farther) /
         static_cast<double>(class_members.rows());
}

Matrix ClassCentroids(const LabeledPoints& points) {
  Matrix centroids = Matrix::Zero(points.num_classes(), points.x.cols());
  std::vector<int64_t> counts(points.num_classes(), 0);
  for (Eigen::Index i = 0; i < points.x.rows(); ++i) {
    centroids.row(points.labels[i]) += points.x.row(i);
    ++counts[points.labels[i]];
  }
  for (int c = 0; c < points.num_classes(); ++c) {
    centroids.row(c) /= static_cast<double>(counts[c]);
  }
  return centroids;
}

double MeanImpostureFactor(const LabeledPoints& points,
                           std::vector<ClassImposture>* per_class) {
  RequireClasses(points, 2);
  const Matrix centroids = ClassCentroids(points);
  const Eigen::Index n = points.x.rows();
  if (per_class != nullptr) per_class->clear();

  double mif = 0.0;
  std::vector<double> member_dist;
  for (int k = 0; k < points.num_classes(); ++k) {
    const auto mu = centroids.row(k);
    member_dist.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (points.labels[i] == k) {
        member_dist.push_back((points.x.row(i) - mu).norm());
      }
    }
    std::sort(member_dist.begin(), member_dist.end());
    const double members = static_cast<double>(member_dist.size());
    // Sorted distances turn each IF into one binary search; the sum runs in
    // row order so the result does not depend on scheduling.
    double sum_if = 0.0;
    int64_t outsiders = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (points.labels[i] == k) continue;
      const double dz = (points.x.row(i) - mu).norm();
      const auto first_farther =
          std::upper_bound(member_dist.begin(), member_dist.end(), dz);
      sum_if += static_cast<double>(member_dist.end() - first_farther) / members;
      ++outsiders;
    }
    const double class_if = sum_if / static_cast<double>(outsiders);
    if (per_class != nullptr) {
      per_class->push_back({points.class_ids[k], class_if});
    }
    mif += class_if;
  }
  return mif / points.num_classes();
}

double VarianceRatio(const LabeledPoints& points) {
  RequireClasses(points, 2);
  const Matrix centroids = ClassCentroids(points);
  const int c_total = points.num_classes();

  std::vector<double> within(c_total, 0.0);
  std::vector<int64_t> counts(c_total, 0);
  for (Eigen::Index i = 0; i < points.x.rows(); ++i) {
    const int l = points.labels[i];
    within[l] += (points.x.row(i) - centroids.row(l)).squaredNorm();
    ++counts[l];
  }
  double intra = 0.0;
  for (int c = 0; c < c_total; ++c) {
    intra += within[c] / static_cast<double>(counts[c]);
  }
  intra /= c_total;

  const Vector grand = centroids.colwise().mean().transpose();
  double inter = 0.0;
  for (int c = 0; c < c_total; ++c) {
    inter += (centroids.row(c).transpose() - grand).squaredNorm();
  }
  inter /= c_total;
  if (!(inter > 0.0)) {
    throw DataError("class centroids coincide; variance ratio undefined");
  }
  return intra / inter;
}

DiagnosticReport Diagnose(const FeatureSet& fs, Split split) {
  const LabeledPoints points = ExtractSplit(fs, split);
  DiagnosticReport report;
  report.mif = MeanImpostureFactor(points, &report.per_class);
  report.rho = VarianceRatio(points);
  return report;
}

}  // namespace fsosr
