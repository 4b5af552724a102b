#pragma once

#include <span>
#include <vector>

namespace bsnas {

/// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman's rho: Pearson correlation of average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

/// Kendall's tau-b (tie-corrected).
double kendall_tau(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> values);

}  // namespace bsnas
