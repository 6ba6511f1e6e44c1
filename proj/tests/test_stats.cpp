#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eegroar/random.hpp"
#include "eegroar/stats.hpp"

using namespace eegroar;

TEST_CASE("macro metrics") {
  ConfusionMatrix perfect(3);
  perfect.at(0, 0) = 5;
  perfect.at(1, 1) = 2;
  perfect.at(2, 2) = 7;
  const MacroMetrics mp = macro_metrics(perfect);
  CHECK(mp.accuracy == doctest::Approx(1.0));
  CHECK(mp.precision == doctest::Approx(1.0));
  CHECK(mp.recall == doctest::Approx(1.0));
  CHECK(mp.f1 == doctest::Approx(1.0));

  ConfusionMatrix half(2);
  half.at(0, 0) = 1;
  half.at(0, 1) = 1;
  half.at(1, 0) = 1;
  half.at(1, 1) = 1;
  const MacroMetrics mh = macro_metrics(half);
  CHECK(mh.accuracy == doctest::Approx(0.5));
  CHECK(mh.precision == doctest::Approx(0.5));
  CHECK(mh.recall == doctest::Approx(0.5));
  CHECK(mh.f1 == doctest::Approx(0.5));

  // all predictions land in class 0
  ConfusionMatrix degenerate(4);
  degenerate.at(0, 0) = 3;
  degenerate.at(1, 0) = 2;
  degenerate.at(2, 0) = 2;
  degenerate.at(3, 0) = 1;
  const MacroMetrics md = macro_metrics(degenerate);
  CHECK(md.recall == doctest::Approx(0.25));  // class 0 recall 1, others 0

  CHECK_THROWS_AS(macro_metrics(ConfusionMatrix(2)), std::invalid_argument);
}

TEST_CASE("macro metrics are invariant under class relabeling") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4;
  cm.at(0, 1) = 1;
  cm.at(1, 1) = 3;
  cm.at(1, 2) = 2;
  cm.at(2, 2) = 5;
  cm.at(2, 0) = 1;
  // swap classes 0 and 2 on both axes
  ConfusionMatrix sw(3);
  const int perm[3] = {2, 1, 0};
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p) sw.at(perm[t], perm[p]) = cm.at(t, p);
  const MacroMetrics a = macro_metrics(cm);
  const MacroMetrics b = macro_metrics(sw);
  CHECK(a.accuracy == doctest::Approx(b.accuracy));
  CHECK(a.precision == doctest::Approx(b.precision));
  CHECK(a.recall == doctest::Approx(b.recall));
  CHECK(a.f1 == doctest::Approx(b.f1));
}

TEST_CASE("ks two-sample test") {
  const std::vector<double> a = {0.1, 0.2, 0.3, 0.4};
  const auto same = ks_two_sample(a, a);
  CHECK(same.statistic == doctest::Approx(0.0));
  CHECK(same.p_value == doctest::Approx(1.0));

  const std::vector<double> low = {0.1, 0.2, 0.5, 0.9};
  const std::vector<double> high = {2.1, 2.4, 2.5, 2.9, 2.95};
  CHECK(ks_two_sample(low, high).statistic == doctest::Approx(1.0));

  // shifted normals separate decisively at n = m = 100
  Rng rng(5);
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(rng.normal());
    y.push_back(rng.normal() + 1.0);
  }
  const auto shifted = ks_two_sample(x, y);
  CHECK(shifted.p_value < 0.001);

  CHECK_THROWS_AS(ks_two_sample({1.0}, a), std::invalid_argument);
}

TEST_CASE("ks statistic symmetry and monotone invariance") {
  Rng rng(6);
  std::vector<double> a, b;
  for (int i = 0; i < 40; ++i) {
    a.push_back(rng.uniform(-1, 1));
    b.push_back(rng.uniform(-0.5, 1.5));
  }
  const double dab = ks_two_sample(a, b).statistic;
  const double dba = ks_two_sample(b, a).statistic;
  CHECK(dab == doctest::Approx(dba));

  auto warp = [](double v) { return std::exp(3.0 * v) + v; };
  std::vector<double> wa, wb;
  for (double v : a) wa.push_back(warp(v));
  for (double v : b) wb.push_back(warp(v));
  CHECK(ks_two_sample(wa, wb).statistic == doctest::Approx(dab));
}

TEST_CASE("one-way anova") {
  // identical groups: no between-group variance
  const std::vector<double> g = {1.0, 2.0, 3.0};
  const auto flat = anova_oneway({g, g});
  CHECK(flat.statistic == doctest::Approx(0.0));
  CHECK(flat.p_value == doctest::Approx(1.0));

  // constant groups with distinct means: flagged degenerate
  const auto degen = anova_oneway({{0.0, 0.0}, {1.0, 1.0}});
  CHECK(degen.degenerate);
  CHECK(degen.p_value == 0.0);

  // textbook instance: F = 3 with df (2, 6)
  const auto book = anova_oneway({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
  CHECK(book.statistic == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(book.df1 == doctest::Approx(2.0));
  CHECK(book.df2 == doctest::Approx(6.0));
  CHECK(book.p_value == doctest::Approx(0.125).epsilon(1e-9));

  CHECK_THROWS_AS(anova_oneway({{1.0, 1.0}, {1.0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(anova_oneway({{1.0, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(anova_oneway({{1.0}, {2.0, 3.0}}), std::invalid_argument);
}

TEST_CASE("anova invariances: shift and scale") {
  Rng rng(7);
  std::vector<std::vector<double>> groups(3);
  for (auto& g : groups)
    for (int i = 0; i < 8; ++i) g.push_back(rng.normal());
  groups[1][0] += 2.0;
  const double f0 = anova_oneway(groups).statistic;

  auto transformed = groups;
  for (auto& g : transformed)
    for (double& v : g) v = v * -3.5 + 11.0;
  const double f1 = anova_oneway(transformed).statistic;
  CHECK(f0 == doctest::Approx(f1).epsilon(1e-9));
}

TEST_CASE("holm correction") {
  const auto single = holm_correction({0.03}, 0.05);
  CHECK(single.adjusted[0] == doctest::Approx(0.03));
  CHECK(single.rejected[0]);

  const auto pair = holm_correction({0.01, 0.04}, 0.05);
  CHECK(pair.adjusted[0] == doctest::Approx(0.02));
  CHECK(pair.adjusted[1] == doctest::Approx(0.04));
  CHECK(pair.rejected[0]);
  CHECK(pair.rejected[1]);

  const auto all_one = holm_correction({1.0, 1.0, 1.0}, 0.05);
  for (int i = 0; i < 3; ++i) {
    CHECK(all_one.adjusted[i] == doctest::Approx(1.0));
    CHECK_FALSE(all_one.rejected[i]);
  }

  CHECK_THROWS_AS(holm_correction({1.5}, 0.05), std::invalid_argument);
}

TEST_CASE("holm adjusted values sit between raw and bonferroni") {
  Rng rng(8);
  std::vector<double> p;
  for (int i = 0; i < 12; ++i) p.push_back(rng.uniform());
  const auto holm = holm_correction(p, 0.05);
  const double m = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(holm.adjusted[i] >= p[i]);
    CHECK(holm.adjusted[i] <= std::min(1.0, m * p[i]) + 1e-15);
  }
}
