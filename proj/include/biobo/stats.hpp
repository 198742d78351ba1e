#pragma once

#include <vector>

namespace biobo::stats {

double mean(const std::vector<double>& v);
/// Sample standard deviation (n - 1 denominator) over sqrt(n); 0 for n < 2.
double sem(const std::vector<double>& v);

/// 1-based ranks; tied values share the average of their ranks.
std::vector<double> average_ranks(const std::vector<double>& v);

/// NaN when either input is constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);
/// Pearson correlation of average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace biobo::stats
