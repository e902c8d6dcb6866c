#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tddelta {

struct SampleSummary {
  double mean = 0.0;
  double std_error = 0.0;  // sample stddev / sqrt(n); 0 when n == 1
  std::size_t n = 0;
  bool single = false;      // true when n == 1 and std_error is undefined
};

/// Mean and standard error with the n - 1 denominator. Throws on empty input.
SampleSummary summarize(std::span<const double> values);

double sample_variance(std::span<const double> values);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
  bool significant = false;
};

/**
 * Welch's unequal-variance t-test of mean(a) - mean(b), with
 * Welch-Satterthwaite degrees of freedom and a two-sided decision at
 * alpha_level. Both samples need n >= 2 and nonzero variance.
 */
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha_level = 0.05);

/// One metric observation tagged with its grid cell.
struct MetricRecord {
  std::string algo;
  double gamma = 0.0;
  double alpha = 0.0;
  int seed = 0;
  double value = 0.0;
};

struct AggregateRow {
  std::string algo;
  double gamma = 0.0;
  double alpha = 0.0;
  SampleSummary summary;
};

/// Groups by (algo, gamma, alpha) in sorted key order; the result does not depend on input order.
std::vector<AggregateRow> aggregate(std::span<const MetricRecord> records);

}  // namespace tddelta
