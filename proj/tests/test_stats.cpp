#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"
#include "realism/error.hpp"
#include "realism/stats/distributions.hpp"
#include "realism/stats/tests.hpp"
#include "stats_oracles.hpp"

using namespace realism;
using namespace realism::stats;
namespace bm = boost::math;

TEST_CASE("distribution functions against Boost.Math") {
  bm::normal n01;
  for (double x = -12; x <= 12; x += 0.173) {
    CHECK(std::abs(normal_cdf(x) - bm::cdf(n01, x)) < 1e-10);
    const double sf = bm::cdf(bm::complement(n01, x));
    CHECK(std::abs(normal_sf(x) - sf) <= 1e-10 * std::max(1.0, sf) + 1e-300);
  }
  CHECK(normal_sf(30) > 0.0);
  CHECK(normal_sf(30) == doctest::Approx(bm::cdf(bm::complement(n01, 30.0))).epsilon(1e-8));
  for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.77, 0.975, 0.999999}) {
    CHECK(std::abs(normal_quantile(p) - bm::quantile(n01, p)) < 1e-9 * std::max(1.0, std::abs(bm::quantile(n01, p))));
  }
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0), ua(0.1, 60.0);
  for (int i = 0; i < 300; ++i) {
    const double x = ux(rng), a = ua(rng), b = ua(rng);
    CHECK(std::abs(incomplete_beta(x, a, b) - bm::ibeta(a, b, x)) < 1e-10);
  }
  for (double df : {1.0, 2.5, 5.0, 30.0, 247.3}) {
    bm::students_t t(df);
    for (double x = -9; x <= 9; x += 0.37) {
      CHECK(std::abs(student_t_cdf(x, df) - bm::cdf(t, x)) < 1e-10);
      CHECK(std::abs(student_t_sf(x, df) - bm::cdf(bm::complement(t, x))) < 1e-10);
    }
  }
  for (auto [d1, d2] : {std::pair{1.0, 5.0}, {2.0, 10.0}, {6.0, 875.0}, {3.5, 7.25}}) {
    bm::fisher_f f(d1, d2);
    for (double x = 0; x <= 20; x += 0.41) CHECK(std::abs(f_sf(x, d1, d2) - bm::cdf(bm::complement(f, x))) < 1e-10);
  }
}

TEST_CASE("wald interval") {
  auto ci = wald_ci(71, 84, 0.05);
  CHECK(std::abs(ci.lo - 0.768) <= 0.001);
  CHECK(std::abs(ci.hi - 0.923) <= 0.001);
  CHECK(std::abs((ci.lo + ci.hi) / 2 - 0.8452) <= 0.0001);
  auto zero = wald_ci(0, 10);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == 0.0);
  auto half = wald_ci(5, 10);
  CHECK(half.lo == doctest::Approx(0.5 - 1.959964 * std::sqrt(0.025)).epsilon(1e-6));
  CHECK(std::abs(half.lo - 0.190) <= 0.001);
  CHECK(std::abs(half.hi - 0.810) <= 0.001);
  auto clipped = wald_ci(1, 2, 0.01);
  CHECK(clipped.lo == 0.0);
  CHECK(clipped.hi == 1.0);
  double prev = 1.0;
  for (long n = 4; n <= 4096; n *= 2) {
    auto c = wald_ci(n / 4, n);
    CHECK(c.hi - c.lo < prev);
    prev = c.hi - c.lo;
  }
  CHECK_THROWS_AS(wald_ci(5, 4), InvalidArgument);
  CHECK_THROWS_AS(wald_ci(1, 0), InvalidArgument);
  CHECK_THROWS_AS(wald_ci(1, 4, 1.0), InvalidArgument);
}

TEST_CASE("z test with continuity correction") {
  auto eq = z_prop_cc(30, 60, 15, 30);
  CHECK(eq.statistic <= 0.0);
  CHECK(eq.p_value >= 0.5);
  CHECK(z_prop_cc(84, 84, 0, 84).p_value < 1e-6);
  auto fx = z_prop_cc(71, 84, 38, 60);
  CHECK(std::abs(fx.p_value - testing::z_oracle(71, 84, 38, 60)) < 1e-6);
  CHECK(fx.descriptor("p1") == doctest::Approx(71.0 / 84));
  CHECK(fx.test == TestKind::z_prop_cc);

  auto degenerate = z_prop_cc(0, 10, 0, 12);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.p_value == 1.0);
  CHECK(z_prop_cc(10, 10, 12, 12).degenerate);

  // the correction can shrink the difference to zero but never reverse it
  auto tiny = z_prop_cc(6, 10, 5, 10);
  CHECK(tiny.statistic == 0.0);
  CHECK(tiny.p_value == 0.5);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    std::uniform_int_distribution<long> un(1, 300);
    const long n1 = un(rng), n2 = un(rng);
    const long k1 = std::uniform_int_distribution<long>(0, n1)(rng), k2 = std::uniform_int_distribution<long>(0, n2)(rng);
    auto r = z_prop_cc(k1, n1, k2, n2);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    if (r.degenerate) continue;
    CHECK(std::abs(r.p_value - testing::z_oracle(k1, n1, k2, n2)) < 1e-6);
    auto swapped = z_prop_cc(k2, n2, k1, n1, Tail::left);
    CHECK(std::abs(swapped.p_value - r.p_value) < 1e-12);
  }
  CHECK_THROWS_AS(z_prop_cc(3, 2, 1, 2), InvalidArgument);
}

TEST_CASE("one-tailed t test") {
  std::vector<double> x{1.2, 3.4, 2.2, 5.1, 0.3};
  auto same = t_one_tailed(x, x);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(0.5));
  std::vector<double> y = x, lifted;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + 1e-3 * i;
  for (double v : y) lifted.push_back(v + 10);
  CHECK(t_one_tailed(lifted, y, Tail::right).p_value < 1e-6);
  CHECK(t_one_tailed(lifted, y, Tail::left).p_value > 1 - 1e-6);

  std::vector<double> c1{2, 2, 2}, c2{2, 2, 2}, c3{3, 3};
  CHECK_THROWS_AS(t_one_tailed(c1, c2), DegenerateData);
  auto inf = t_one_tailed(c3, c1);
  CHECK(inf.degenerate);
  CHECK(inf.p_value == 0.0);
  CHECK_THROWS_AS(t_one_tailed(std::vector<double>{1.0}, x), InvalidArgument);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const int nx = i == 0 ? 126 : 2 + i % 40, ny = i == 0 ? 126 : 2 + (i * 7) % 33;
    std::vector<double> a(nx), b(ny);
    const double sa = 0.5 + (i % 5), sb = 0.2 + (i % 3), shift = 0.1 * (i % 9) - 0.4;
    for (auto& v : a) v = sa * nd(rng) + shift;
    for (auto& v : b) v = sb * nd(rng);
    for (Tail tail : {Tail::right, Tail::left, Tail::two}) {
      auto w = t_one_tailed(a, b, tail);
      auto o = testing::welch_oracle(a, b, tail);
      CHECK(std::abs(w.statistic - o.statistic) < 1e-6);
      CHECK(std::abs(w.p_value - o.p_value) < 1e-6);
      CHECK(std::abs(w.df1 - o.df) < 1e-6);
      auto p = t_one_tailed(a, b, tail, TVariant::pooled);
      auto po = testing::pooled_oracle(a, b, tail);
      CHECK(std::abs(p.statistic - po.statistic) < 1e-6);
      CHECK(std::abs(p.p_value - po.p_value) < 1e-6);
    }
  }
}

TEST_CASE("one-way anova") {
  std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}};
  auto r = anova_f(same);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  std::vector<std::vector<double>> eq_means{{1, 3}, {0, 4}, {2, 2, 2, 2}};
  CHECK(anova_f(eq_means).statistic == 0.0);
  std::vector<std::vector<double>> flat{{5, 5}, {5, 5, 5}};
  CHECK_THROWS_AS(anova_f(flat), DegenerateData);
  std::vector<std::vector<double>> one{{1, 2, 3}};
  CHECK_THROWS_AS(anova_f(one), InvalidArgument);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + t % 6;
    std::vector<std::vector<double>> groups(k);
    for (int g = 0; g < k; ++g) {
      groups[g].resize(t == 0 ? 126 : 2 + (t + g) % 20);
      for (auto& v : groups[g]) v = nd(rng) + 0.3 * g * (t % 3);
    }
    auto a = anova_f(groups);
    auto o = testing::anova_oracle(groups);
    CHECK(std::abs(a.statistic - o.statistic) < 1e-6 * std::max(1.0, o.statistic));
    CHECK(std::abs(a.p_value - o.p_value) < 1e-6);
    CHECK(a.df1 == k - 1);
    if (k == 2) {
      const double tt = testing::pooled_oracle(groups[0], groups[1], Tail::two).statistic;
      CHECK(std::abs(a.statistic - tt * tt) <= 1e-9 * std::max(1.0, a.statistic));
    }
  }

  std::vector<std::vector<double>> strong(7);
  for (int g = 0; g < 7; ++g) {
    strong[g].resize(126);
    for (auto& v : strong[g]) v = 0.1 * nd(rng) + 0.05 * g;
  }
  auto big = anova_f(strong);
  CHECK(big.p_value < 1e-10);
  CHECK(std::abs(big.statistic - testing::anova_oracle(strong).statistic) < 1e-6 * big.statistic);
}

TEST_CASE("pearson correlation") {
  std::vector<double> x{1, 2, 3, 4, 5}, y;
  for (double v : x) y.push_back(2 * v + 1);
  auto perfect = pearson(x, y);
  CHECK(perfect.statistic == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(perfect.p_value < 1e-12);

  auto [px, py] = testing::correlated_pair(7, -0.782, 21);
  auto paper = pearson(px, py);
  CHECK(paper.statistic == doctest::Approx(-0.782).epsilon(1e-12));
  CHECK(std::abs(paper.p_value - 0.039) <= 0.002);
  CHECK(paper.tail == Tail::two);

  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(t == 0 ? 20 : 3 + t % 30), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = nd(rng);
      b[i] = 0.5 * a[i] + nd(rng);
    }
    auto r = pearson(a, b);
    auto o = testing::pearson_oracle(a, b);
    CHECK(std::abs(r.statistic - o.statistic) < 1e-9);
    CHECK(std::abs(r.p_value - o.p_value) < 1e-9);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    std::vector<double> a2, b2;
    for (double v : a) a2.push_back(3 * v - 7);
    for (double v : b) b2.push_back(0.25 * v + 100);
    CHECK(pearson(a2, b2).statistic == doctest::Approx(r.statistic).epsilon(1e-10));
    for (auto& v : a2) v = -v;
    CHECK(pearson(a2, b2).statistic == doctest::Approx(-r.statistic).epsilon(1e-10));
  }
  std::vector<double> flat{1, 1, 1};
  CHECK_THROWS_AS(pearson(flat, std::vector<double>{1, 2, 3}), DegenerateData);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST_CASE("summaries") {
  std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  auto s = summarize(v);
  CHECK(s.n == 8);
  CHECK(s.mean == 5.0);
  CHECK(s.std == doctest::Approx(std::sqrt(32.0 / 7)));
  CHECK(summarize(std::vector<double>{3.0}).std == 0.0);
}

TEST_CASE("subset resampling") {
  CHECK(choose(9, 5) == 126);
  CHECK(choose(20, 5) == 15504);
  CHECK(choose(5, 7) == 0);
  CHECK(choose(200, 100) == UINT64_MAX);

  auto all = resample_subsets(9, SubsetPlan{5, 126, 1});
  REQUIRE(all.size() == 126);
  std::set<std::vector<std::size_t>> distinct(all.begin(), all.end());
  CHECK(distinct.size() == 126);
  for (const auto& s : all) {
    CHECK(s.size() == 5);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(s.back() < 9);
  }
  CHECK(all == resample_subsets(9, SubsetPlan{5, 126, 99}));

  auto single = resample_subsets(5, SubsetPlan{5, 1, 3});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == std::vector<std::size_t>{0, 1, 2, 3, 4});

  auto r20 = resample_subsets(20, SubsetPlan{5, 126, 42});
  CHECK(std::set<std::vector<std::size_t>>(r20.begin(), r20.end()).size() == 126);
  CHECK(r20 == resample_subsets(20, SubsetPlan{5, 126, 42}));
  CHECK(r20 != resample_subsets(20, SubsetPlan{5, 126, 43}));

  CHECK_THROWS_AS(resample_subsets(4, SubsetPlan{5, 1, 0}), InvalidArgument);
  CHECK_THROWS_AS(resample_subsets(6, SubsetPlan{5, 10, 0}), InvalidArgument);
  auto repl = resample_subsets(6, SubsetPlan{5, 10, 0, true});
  CHECK(repl.size() == 10);

  std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
  auto named = resample_subsets(std::span<const std::string>(names), SubsetPlan{5, 6, 0});
  CHECK(named.size() == 6);
  CHECK(named[0].size() == 5);
}
