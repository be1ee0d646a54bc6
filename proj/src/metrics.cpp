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

#include "emoseq/metrics.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "emoseq/error.hpp"

namespace emoseq::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) fail(ErrorCode::kInvalidArgument, "confusion matrix needs >= 1 class");
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) fail(ErrorCode::kIndexOutOfRange, "confusion index out of range");
  return counts_[truth * n_ + predicted];
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) fail(ErrorCode::kIndexOutOfRange, "confusion index out of range");
  ++counts_[truth * n_ + predicted];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    fail(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                         std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] < 0 || labels[i] < 0 ||
        static_cast<std::size_t>(predictions[i]) >= num_classes ||
        static_cast<std::size_t>(labels[i]) >= num_classes) {
      fail(ErrorCode::kIndexOutOfRange, "class index at position " + std::to_string(i) +
                                            " outside [0, " + std::to_string(num_classes) + ")");
    }
    cm.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(predictions[i]));
  }
  return cm;
}

bool ClassReport::has_warnings() const noexcept {
  for (const auto& c : classes) {
    if (c.precision_undefined || c.recall_undefined) return true;
  }
  return false;
}

double f1_score(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

ClassReport per_class_metrics(const ConfusionMatrix& cm) {
  ClassReport report;
  for (std::size_t k = 0; k < cm.num_classes(); ++k) {
    ClassMetrics m;
    const double tp = static_cast<double>(cm.at(k, k));
    const std::uint64_t predicted = cm.col_sum(k);
    m.support = cm.row_sum(k);
    if (predicted == 0) {
      m.precision_undefined = true;
    } else {
      m.precision = tp / static_cast<double>(predicted);
    }
    if (m.support == 0) {
      m.recall_undefined = true;
    } else {
      m.recall = tp / static_cast<double>(m.support);
    }
    m.f1 = f1_score(m.precision, m.recall);
    report.classes.push_back(m);
  }
  return report;
}

double harmonic_mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kInvalidArgument, "harmonic mean of no values");
  double inv = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) {
      fail(ErrorCode::kZeroMetricValue, "harmonic mean undefined: a per-class value is " +
                                            std::to_string(v));
    }
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

AggregateReport harmonic_aggregate(const ClassReport& report) {
  std::vector<double> p, r, f;
  for (const auto& c : report.classes) {
    p.push_back(c.precision);
    r.push_back(c.recall);
    f.push_back(c.f1);
  }
  return AggregateReport{harmonic_mean(p), harmonic_mean(r), harmonic_mean(f)};
}

EvaluationReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  if (class_names.size() != cm.num_classes()) {
    fail(ErrorCode::kLengthMismatch, "class name count does not match confusion matrix");
  }
  EvaluationReport report;
  report.class_names = std::move(class_names);
  report.per_class = per_class_metrics(cm);
  try {
    report.aggregate = harmonic_aggregate(report.per_class);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroMetricValue) throw;
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double parse_metric(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kMalformedFile, "bad metric value '" + s + "' in report");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "class,precision,recall,f1,support\n";
  for (std::size_t k = 0; k < report.per_class.classes.size(); ++k) {
    const auto& c = report.per_class.classes[k];
    out << report.class_names[k] << ',' << fixed(c.precision, 6) << ',' << fixed(c.recall, 6)
        << ',' << fixed(c.f1, 6) << ',' << c.support << '\n';
  }
  if (report.aggregate) {
    const auto& a = *report.aggregate;
    out << "harmonic_mean," << fixed(a.precision, 6) << ',' << fixed(a.recall, 6) << ','
        << fixed(a.f1, 6) << ",-\n";
  } else {
    out << "harmonic_mean,undefined,undefined,undefined,-\n";
  }
}

EvaluationReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "class,precision,recall,f1,support") {
    fail(ErrorCode::kMalformedFile, "report CSV header mismatch");
  }
  EvaluationReport report;
  bool saw_aggregate = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) fail(ErrorCode::kMalformedFile, "report row needs 5 cells: " + line);
    if (cells[0] == "harmonic_mean") {
      if (cells[1] != "undefined") {
        report.aggregate =
            AggregateReport{parse_metric(cells[1]), parse_metric(cells[2]), parse_metric(cells[3])};
      }
      saw_aggregate = true;
      continue;
    }
    ClassMetrics m;
    m.precision = parse_metric(cells[1]);
    m.recall = parse_metric(cells[2]);
    m.f1 = parse_metric(cells[3]);
    m.support = static_cast<std::uint64_t>(parse_metric(cells[4]));
    report.class_names.push_back(cells[0]);
    report.per_class.classes.push_back(m);
  }
  if (!saw_aggregate || report.class_names.empty()) {
    fail(ErrorCode::kMalformedFile, "report CSV lacks class rows or harmonic_mean row");
  }
  return report;
}

std::string format_report_table(const EvaluationReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %10s\n", "", "precision", "recall", "f1",
                "support");
  out << buf;
  for (std::size_t k = 0; k < report.per_class.classes.size(); ++k) {
    const auto& c = report.per_class.classes[k];
    std::snprintf(buf, sizeof buf, "%-16s %10.3f %10.3f %10.3f %10llu\n",
                  report.class_names[k].c_str(), c.precision, c.recall, c.f1,
                  static_cast<unsigned long long>(c.support));
    out << buf;
  }
  if (report.aggregate) {
    std::snprintf(buf, sizeof buf, "%-16s %10.3f %10.3f %10.3f %10s\n", "harmonic mean",
                  report.aggregate->precision, report.aggregate->recall, report.aggregate->f1, "-");
  } else {
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %10s\n", "harmonic mean", "undefined",
                  "undefined", "undefined", "-");
  }
  out << buf;
  return out.str();
}

}  // namespace emoseq::metrics
