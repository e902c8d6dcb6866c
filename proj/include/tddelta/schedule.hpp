#pragma once

#include "tddelta/core.hpp"

#include <algorithm>

namespace tddelta {

/// Trace decay used by every lambda-return. At a zero discount the lambda
/// entry is read as the decay itself, since lambda * 0 would otherwise erase it.
template <typename Scalar>
Scalar trace_decay(Scalar gamma, Scalar lambda) {
  return gamma == Scalar(0) ? lambda : lambda * gamma;
}

/**
 * Discount ladder gamma_0 < ... < gamma_Z with the per-timescale horizon
 * k_z, trace parameter lambda_z and learning rate alpha_z.
 */
template <typename Scalar>
struct GammaSchedule {
  std::vector<Scalar> gammas;
  std::vector<int> ks;
  std::vector<Scalar> lambdas;
  std::vector<Scalar> alphas;

  int size() const { return static_cast<int>(gammas.size()); }
  int top() const { return size() - 1; }
  Scalar gamma_top() const { return gammas.back(); }
  int k_top() const { return ks.back(); }
  Scalar decay(int z) const { return trace_decay(gammas.at(z), lambdas.at(z)); }

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const {
    if (gammas.empty()) throw std::invalid_argument("GammaSchedule: empty schedule");
    const std::size_t n = gammas.size();
    if (ks.size() != n || lambdas.size() != n || alphas.size() != n)
      throw std::invalid_argument("GammaSchedule: all parameter vectors must share one length");
    for (std::size_t z = 0; z < n; ++z) {
      if (!(gammas[z] >= Scalar(0) && gammas[z] < Scalar(1)))
        throw std::invalid_argument("GammaSchedule: discounts must lie in [0, 1)");
      if (z > 0 && !(gammas[z] > gammas[z - 1]))
        throw std::invalid_argument("GammaSchedule: discounts must be strictly ascending");
      if (ks[z] < 1) throw std::invalid_argument("GammaSchedule: horizons must be positive");
      if (!(lambdas[z] >= Scalar(0))) throw std::invalid_argument("GammaSchedule: lambdas must be nonnegative");
      if (!(decay(static_cast<int>(z)) < Scalar(1)))
        throw std::invalid_argument("GammaSchedule: lambda_z * gamma_z must be below 1");
      if (!(alphas[z] >= Scalar(0))) throw std::invalid_argument("GammaSchedule: learning rates must be nonnegative");
    }
  }

  bool ks_monotone() const { return std::is_sorted(ks.begin(), ks.end()); }
};

/// 0, then gamma <- (gamma + 1) / 2 until the target is reached; the last entry is the target exactly.
template <typename Scalar>
std::vector<Scalar> doubling_gamma_schedule(Scalar gamma_target) {
  if (!(gamma_target >= Scalar(0) && gamma_target < Scalar(1)))
    throw std::invalid_argument("doubling_gamma_schedule: target must lie in [0, 1)");
  std::vector<Scalar> gammas{Scalar(0)};
  while (gammas.back() < gamma_target) gammas.push_back((gammas.back() + Scalar(1)) / Scalar(2));
  gammas.back() = gamma_target;
  return gammas;
}

/// k_z = round(1 / (1 - gamma_z)), rounding halves up, at least 1.
template <typename Scalar>
std::vector<int> k_schedule(const std::vector<Scalar>& gammas) {
  std::vector<int> ks;
  ks.reserve(gammas.size());
  for (Scalar g : gammas) {
    if (!(g < Scalar(1))) throw std::invalid_argument("k_schedule: discounts must be below 1");
    const Scalar horizon = Scalar(1) / (Scalar(1) - g);
    ks.push_back(std::max(1, static_cast<int>(std::floor(horizon + Scalar(0.5)))));
  }
  return ks;
}

template <typename Scalar>
bool contraction_admissible(Scalar gamma, Scalar lambda) {
  if (gamma == Scalar(0)) return true;
  return lambda >= Scalar(0) && lambda < (Scalar(1) + gamma) / (Scalar(2) * gamma);
}

/**
 * lambda_z = lambda_top * gamma_top / gamma_z, so every timescale shares the
 * trace decay of the single estimator. capped clips each entry to 1.
 *
 * At gamma_z = 0 the uncapped entry holds the decay lambda_top * gamma_top
 * itself (see trace_decay), which keeps the parity exact for ladders starting
 * at 0; the capped entry is 0.
 */
template <typename Scalar>
std::vector<Scalar> parity_lambda_schedule(const std::vector<Scalar>& gammas, Scalar gamma_top, Scalar lambda_top,
                                           bool capped) {
  const Scalar product = lambda_top * gamma_top;
  if (!(product < Scalar(1) && product >= Scalar(0)))
    throw std::invalid_argument("parity_lambda_schedule: lambda_top * gamma_top must lie in [0, 1)");
  std::vector<Scalar> lambdas;
  lambdas.reserve(gammas.size());
  for (Scalar g : gammas) {
    Scalar lambda;
    if (g == Scalar(0)) {
      // A cap of lambda <= 1 at zero discount leaves decay 1 * 0.
      lambda = capped ? Scalar(0) : product;
    } else {
      lambda = product / g;
      if (capped) lambda = std::min(lambda, Scalar(1));
    }
    if (!capped && g > product && !contraction_admissible(g, lambda))
      throw std::logic_error("parity_lambda_schedule: entry outside the contraction range");
    lambdas.push_back(lambda);
  }
  return lambdas;
}

/// Doubling ladder with tailored horizons, a shared learning rate and parity lambdas.
template <typename Scalar>
GammaSchedule<Scalar> make_doubling_schedule(Scalar gamma_target, Scalar alpha, Scalar lambda_top = Scalar(0),
                                             bool capped = false) {
  GammaSchedule<Scalar> schedule;
  schedule.gammas = doubling_gamma_schedule(gamma_target);
  schedule.ks = k_schedule(schedule.gammas);
  schedule.lambdas = parity_lambda_schedule(schedule.gammas, gamma_target, lambda_top, capped);
  schedule.alphas.assign(schedule.gammas.size(), alpha);
  schedule.validate();
  return schedule;
}

}  // namespace tddelta
