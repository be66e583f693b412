#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace realism::stats {

enum class TestKind { wald_ci, z_prop_cc, t_one_tailed, anova_f, pearson };
enum class Tail { left, right, two };

std::string to_string(TestKind k);
std::string to_string(Tail t);
Tail parse_tail(const std::string& s);

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestKind test = TestKind::wald_ci;
  Tail tail = Tail::right;
  /// Set when the statistic is infinite or the p-value is a convention rather than a computed tail.
  bool degenerate = false;
  double df1 = 0.0, df2 = 0.0;
  /// Sample descriptors (proportions, means, variances, sizes) by name.
  std::vector<std::pair<std::string, double>> descriptors;

  double descriptor(const std::string& name) const;
};

struct Interval {
  double lo = 0.0, hi = 0.0;
};

/// Normal-approximation interval p ± z * sqrt(p (1 - p) / n), clipped to [0, 1].
Interval wald_ci(long k, long n, double alpha = 0.05);

/// Pooled two-proportion z test with Yates correction 0.5 (1/n1 + 1/n2), shrinking
/// |p1 - p2| toward zero but never past it. The right tail tests p1 > p2. When the
/// pooled proportion is 0 or 1 the result is flagged degenerate with p = 1.
StatResult z_prop_cc(long k1, long n1, long k2, long n2, Tail tail = Tail::right);

enum class TVariant { welch, pooled };

/// Two-sample t test of mean(x) against mean(y); the right tail tests x > y.
StatResult t_one_tailed(std::span<const double> x, std::span<const double> y, Tail tail = Tail::right,
                        TVariant variant = TVariant::welch);

StatResult anova_f(std::span<const std::vector<double>> groups);

/// Sample correlation with the two-tailed p-value of r sqrt(n-2) / sqrt(1 - r^2) on n-2 df.
StatResult pearson(std::span<const double> x, std::span<const double> y);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation; 0 for n = 1
};
Summary summarize(std::span<const double> v);

struct SubsetPlan {
  int subset_size = 5;
  int n_subsets = 126;
  std::uint64_t seed = 0;
  /// Allow the same combination to appear more than once.
  bool with_replacement = false;
};

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t choose(std::uint64_t n, std::uint64_t k);

/// Index subsets of {0..population-1}, each sorted ascending. When C(population, k)
/// equals n_subsets every combination is listed once in lexicographic order;
/// otherwise distinct combinations are drawn at random (or independent ones
/// with with_replacement).
std::vector<std::vector<std::size_t>> resample_subsets(std::size_t population, const SubsetPlan& plan);

template <typename T>
std::vector<std::vector<T>> resample_subsets(std::span<const T> population, const SubsetPlan& plan) {
  std::vector<std::vector<T>> out;
  for (const auto& idx : resample_subsets(population.size(), plan)) {
    auto& s = out.emplace_back();
    for (auto i : idx) s.push_back(population[i]);
  }
  return out;
}

}  // namespace realism::stats
