#include "sonomyo/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sonomyo/error.hpp"

namespace sonomyo {

Alternative parse_alternative(std::string_view name) {
  if (name == "less") return Alternative::less;
  if (name == "greater") return Alternative::greater;
  if (name == "two_sided") return Alternative::two_sided;
  throw ConfigError("unknown alternative '" + std::string(name) + "'");
}

std::string_view to_string(Alternative a) {
  switch (a) {
    case Alternative::less: return "less";
    case Alternative::greater: return "greater";
    case Alternative::two_sided: return "two_sided";
  }
  return "two_sided";
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative) {
  if (a.empty() || b.empty()) throw Error("Mann-Whitney U needs two non-empty groups");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);

  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum += ranks[i];

  MannWhitneyResult r;
  r.u = rank_sum - n1 * (n1 + 1.0) / 2.0;

  // Tie term sum(t^3 - t) over groups of equal values.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  const double sd = std::sqrt(var);
  const double diff = r.u - mu;
  switch (alternative) {
    case Alternative::greater:
      r.z = (diff - 0.5) / sd;
      r.p = 1.0 - normal_cdf(r.z);
      break;
    case Alternative::less:
      r.z = (diff + 0.5) / sd;
      r.p = normal_cdf(r.z);
      break;
    case Alternative::two_sided: {
      const double corrected = std::max(std::abs(diff) - 0.5, 0.0);
      r.z = (diff < 0.0 ? -corrected : corrected) / sd;
      r.p = std::min(1.0, 2.0 * normal_cdf(-std::abs(r.z)));
      break;
    }
  }
  return r;
}

FriedmanResult friedman_test(const std::vector<std::vector<double>>& blocks) {
  if (blocks.size() < 2) throw Error("Friedman test needs at least two blocks");
  const std::size_t k = blocks.front().size();
  if (k < 2) throw Error("Friedman test needs at least two treatments");
  FriedmanResult r;
  r.rank_sums.assign(k, 0.0);
  for (const auto& block : blocks) {
    if (block.size() != k) throw Error("Friedman blocks must all have the same number of treatments");
    const std::vector<double> ranks = midranks(block);
    for (std::size_t j = 0; j < k; ++j) r.rank_sums[j] += ranks[j];
  }
  const auto n = static_cast<double>(blocks.size());
  const auto kk = static_cast<double>(k);
  double sum_sq = 0.0;
  for (double s : r.rank_sums) sum_sq += s * s;
  r.chi2 = 12.0 / (n * kk * (kk + 1.0)) * sum_sq - 3.0 * n * (kk + 1.0);
  // Rounding can push the closed form a hair below zero.
  r.chi2 = std::max(r.chi2, 0.0);
  r.dof = static_cast<int>(k) - 1;
  r.p = chi_square_sf(r.chi2, r.dof);
  return r;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

}  // namespace sonomyo
