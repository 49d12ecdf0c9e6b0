#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace sonomyo {

enum class Alternative { less, greater, two_sided };

Alternative parse_alternative(std::string_view name);
std::string_view to_string(Alternative a);

// Ranks 1..n with tied values sharing the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

double normal_cdf(double z);
// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

struct MannWhitneyResult {
  double u = 0.0;  // U for the first group: pairs a > b plus half the ties
  double z = 0.0;
  double p = 1.0;
};

// Normal approximation with tie-corrected variance and a 0.5 continuity
// correction. "less" tests whether the first group is shifted left of the
// second.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative = Alternative::two_sided);

struct FriedmanResult {
  double chi2 = 0.0;
  double p = 1.0;
  int dof = 0;
  std::vector<double> rank_sums;
};

// blocks[i][j] = measurement of treatment j in block i. Within-block
// midranks, no tie correction of the statistic.
FriedmanResult friedman_test(const std::vector<std::vector<double>>& blocks);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 when n < 2
};

Summary summarize(std::span<const double> values);

}  // namespace sonomyo
