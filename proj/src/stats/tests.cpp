#include "realism/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "realism/error.hpp"
#include "realism/stats/distributions.hpp"

namespace realism::stats {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tail_p_normal(double z, Tail tail) {
  switch (tail) {
    case Tail::right: return normal_sf(z);
    case Tail::left: return normal_cdf(z);
    case Tail::two: return std::min(1.0, 2 * normal_sf(std::fabs(z)));
  }
  return 1.0;
}

double tail_p_t(double t, double df, Tail tail) {
  switch (tail) {
    case Tail::right: return student_t_sf(t, df);
    case Tail::left: return student_t_cdf(t, df);
    case Tail::two: return std::min(1.0, 2 * student_t_sf(std::fabs(t), df));
  }
  return 1.0;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " contains a non-finite value");
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(std::span<const double> v, double m) {
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

std::string to_string(TestKind k) {
  switch (k) {
    case TestKind::wald_ci: return "wald_ci";
    case TestKind::z_prop_cc: return "z_prop_cc";
    case TestKind::t_one_tailed: return "t_one_tailed";
    case TestKind::anova_f: return "anova_f";
    case TestKind::pearson: return "pearson";
  }
  return "?";
}

std::string to_string(Tail t) {
  switch (t) {
    case Tail::left: return "left";
    case Tail::right: return "right";
    case Tail::two: return "two";
  }
  return "?";
}

Tail parse_tail(const std::string& s) {
  if (s == "left" || s == "less") return Tail::left;
  if (s == "right" || s == "greater") return Tail::right;
  if (s == "two") return Tail::two;
  throw InvalidArgument("unknown tail '" + s + "' (left, right, two)");
}

double StatResult::descriptor(const std::string& name) const {
  for (const auto& [n, v] : descriptors)
    if (n == name) return v;
  throw InvalidArgument("no descriptor '" + name + "'");
}

Interval wald_ci(long k, long n, double alpha) {
  if (n < 1 || k < 0 || k > n) throw InvalidArgument("wald_ci needs 0 <= k <= n and n >= 1");
  if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("alpha must lie in (0, 1)");
  const double p = static_cast<double>(k) / n;
  const double half = normal_quantile(1 - alpha / 2) * std::sqrt(p * (1 - p) / n);
  return {std::clamp(p - half, 0.0, 1.0), std::clamp(p + half, 0.0, 1.0)};
}

StatResult z_prop_cc(long k1, long n1, long k2, long n2, Tail tail) {
  if (n1 < 1 || n2 < 1 || k1 < 0 || k2 < 0 || k1 > n1 || k2 > n2)
    throw InvalidArgument("z_prop_cc needs 0 <= k <= n and n >= 1 for both samples");
  StatResult r;
  r.test = TestKind::z_prop_cc;
  r.tail = tail;
  const double p1 = static_cast<double>(k1) / n1, p2 = static_cast<double>(k2) / n2;
  const double pooled = static_cast<double>(k1 + k2) / (n1 + n2);
  r.descriptors = {{"p1", p1}, {"n1", double(n1)}, {"p2", p2}, {"n2", double(n2)}, {"pooled", pooled}};
  if (pooled == 0.0 || pooled == 1.0) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double inv = 1.0 / n1 + 1.0 / n2;
  const double diff = p1 - p2;
  const double shrunk = std::copysign(std::max(std::fabs(diff) - 0.5 * inv, 0.0), diff);
  r.statistic = shrunk / std::sqrt(pooled * (1 - pooled) * inv);
  r.p_value = tail_p_normal(r.statistic, tail);
  return r;
}

StatResult t_one_tailed(std::span<const double> x, std::span<const double> y, Tail tail, TVariant variant) {
  if (x.size() < 2 || y.size() < 2) throw InvalidArgument("t test needs at least 2 values per sample");
  check_finite(x, "t test sample");
  check_finite(y, "t test sample");
  StatResult r;
  r.test = TestKind::t_one_tailed;
  r.tail = tail;
  const double nx = x.size(), ny = y.size();
  const double mx = mean_of(x), my = mean_of(y);
  const double vx = var_of(x, mx), vy = var_of(y, my);
  r.descriptors = {{"mean_x", mx}, {"var_x", vx}, {"n_x", nx}, {"mean_y", my}, {"var_y", vy}, {"n_y", ny}};
  double se2, df;
  if (variant == TVariant::welch) {
    const double a = vx / nx, b = vy / ny;
    se2 = a + b;
    df = se2 > 0 ? se2 * se2 / (a * a / (nx - 1) + b * b / (ny - 1)) : nx + ny - 2;
  } else {
    df = nx + ny - 2;
    se2 = ((nx - 1) * vx + (ny - 1) * vy) / df * (1 / nx + 1 / ny);
  }
  r.df1 = df;
  const double d = mx - my;
  if (se2 == 0.0) {
    if (d == 0.0) throw DegenerateData("both samples are constant with equal means");
    r.degenerate = true;
    r.statistic = d > 0 ? kInf : -kInf;
  } else {
    r.statistic = d / std::sqrt(se2);
  }
  r.p_value = tail_p_t(r.statistic, df, tail);
  return r;
}

StatResult anova_f(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw InvalidArgument("anova needs at least 2 groups");
  double total = 0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidArgument("anova needs at least 2 values per group");
    check_finite(g, "anova group");
    total += std::accumulate(g.begin(), g.end(), 0.0);
    n += g.size();
  }
  const double grand = total / n;
  double ssb = 0, ssw = 0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    ssb += g.size() * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  if (ssb == 0.0 && ssw == 0.0) throw DegenerateData("all anova values are identical");
  StatResult r;
  r.test = TestKind::anova_f;
  r.tail = Tail::right;
  const double k = groups.size();
  r.df1 = k - 1;
  r.df2 = n - k;
  r.descriptors = {{"k", k}, {"n", double(n)}, {"ss_between", ssb}, {"ss_within", ssw}};
  if (ssw == 0.0) {
    r.degenerate = true;
    r.statistic = kInf;
    r.p_value = 0.0;
    return r;
  }
  r.statistic = (ssb / r.df1) / (ssw / r.df2);
  r.p_value = f_sf(r.statistic, r.df1, r.df2);
  return r;
}

StatResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("pearson needs equal-length samples");
  if (x.size() < 3) throw InvalidArgument("pearson needs n >= 3");
  check_finite(x, "pearson sample");
  check_finite(y, "pearson sample");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateData("pearson needs nonzero variance in both samples");
  StatResult res;
  res.test = TestKind::pearson;
  res.tail = Tail::two;
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = x.size() - 2.0;
  res.statistic = r;
  res.df1 = df;
  res.descriptors = {{"n", double(x.size())}, {"r", r}};
  if (std::fabs(r) == 1.0) {
    res.p_value = 0.0;
    return res;
  }
  const double t = r * std::sqrt(df) / std::sqrt(1 - r * r);
  res.descriptors.emplace_back("t", t);
  res.p_value = tail_p_t(t, df, Tail::two);
  return res;
}

Summary summarize(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("summarize needs at least one value");
  Summary s;
  s.n = v.size();
  s.mean = mean_of(v);
  s.std = v.size() > 1 ? std::sqrt(var_of(v, s.mean)) : 0.0;
  return s;
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

std::vector<std::vector<std::size_t>> resample_subsets(std::size_t population, const SubsetPlan& plan) {
  if (plan.subset_size < 1 || plan.n_subsets < 1) throw InvalidArgument("subset plan needs positive sizes");
  const auto k = static_cast<std::size_t>(plan.subset_size);
  if (population < k) throw InvalidArgument("population smaller than the subset size");
  const std::uint64_t combos = choose(population, k);
  const auto want = static_cast<std::uint64_t>(plan.n_subsets);
  if (!plan.with_replacement && combos < want)
    throw InvalidArgument("population admits only " + std::to_string(combos) + " distinct subsets");

  std::vector<std::vector<std::size_t>> out;
  if (!plan.with_replacement && combos == want) {
    std::vector<std::size_t> c(k);
    std::iota(c.begin(), c.end(), 0);
    while (true) {
      out.push_back(c);
      std::size_t i = k;
      while (i > 0 && c[i - 1] == population - k + (i - 1)) --i;
      if (i == 0) break;
      ++c[i - 1];
      for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
    }
    return out;
  }
  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> pool(population);
  std::set<std::vector<std::size_t>> seen;
  while (out.size() < want) {
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, population - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> s(pool.begin(), pool.begin() + k);
    std::sort(s.begin(), s.end());
    if (plan.with_replacement || seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace realism::stats
