/*
 * Copyright 2026 The emoseq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emoseq::metrics {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const noexcept { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  void add(std::size_t truth, std::size_t predicted);
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;
  std::uint64_t total() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t num_classes = 6);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  // Set when the corresponding denominator was zero and the value was
  // defined as 0 by convention.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct ClassReport {
  std::vector<ClassMetrics> classes;

  bool has_warnings() const noexcept;
};

// f1 = 2pr / (p + r), or 0 when p + r == 0.
double f1_score(double precision, double recall) noexcept;

ClassReport per_class_metrics(const ConfusionMatrix& cm);

struct AggregateReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// n / sum(1 / v); every value must be strictly positive.
double harmonic_mean(std::span<const double> values);
AggregateReport harmonic_aggregate(const ClassReport& report);

// Table-shaped evaluation result: one row per class plus the harmonic row.
struct EvaluationReport {
  std::vector<std::string> class_names;
  ClassReport per_class;
  std::optional<AggregateReport> aggregate;  // empty when some value is 0
};

EvaluationReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names);

// class,precision,recall,f1,support rows followed by a harmonic_mean row.
void write_report_csv(std::ostream& out, const EvaluationReport& report);
EvaluationReport read_report_csv(std::istream& in);
std::string format_report_table(const EvaluationReport& report);

}  // namespace emoseq::metrics
