#include "tddelta/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace tddelta {

namespace {

double mean_of(std::span<const double> values) {
  // Sorted summation makes the result independent of record order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  return total / static_cast<double>(sorted.size());
}

}  // namespace

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
  const double m = mean_of(values);
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - m) * (v - m));
  std::sort(sq.begin(), sq.end());
  double total = 0.0;
  for (double v : sq) total += v;
  return total / static_cast<double>(values.size() - 1);
}

SampleSummary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  SampleSummary s;
  s.n = values.size();
  s.mean = mean_of(values);
  if (s.n == 1) {
    s.single = true;
    return s;
  }
  s.std_error = std::sqrt(sample_variance(values) / static_cast<double>(s.n));
  return s;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha_level) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: each sample needs n >= 2");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw std::invalid_argument("welch_t_test: alpha_level must lie in (0, 1)");
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (!(va > 0.0) || !(vb > 0.0)) throw std::invalid_argument("welch_t_test: degenerate sample with zero variance");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  WelchResult r;
  r.t = (mean_of(a) - mean_of(b)) / std::sqrt(qa + qb);
  r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.significant = r.p_value < alpha_level;
  return r;
}

std::vector<AggregateRow> aggregate(std::span<const MetricRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate: empty record set");
  std::map<std::tuple<std::string, double, double>, std::vector<double>> groups;
  for (const auto& r : records) groups[{r.algo, r.gamma, r.alpha}].push_back(r.value);
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (const auto& [key, values] : groups)
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), summarize(values)});
  return out;
}

}  // namespace tddelta
