#include <gtest/gtest.h>

#include <functional>
#include <limits>

#include "ssmgan/metrics.hpp"
#include "ssmgan/rng.hpp"
#include "test_util.hpp"
#include "transport_oracle.hpp"

using namespace ssmgan;

namespace {

std::vector<double> random_seq(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = std::round(rng.uniform(-3, 3) * 4) / 4;
  return v;
}

}  // namespace

TEST(Dtw, Examples) {
  const std::vector<double> x{0.3, -1.0, 2.0, 2.0};
  EXPECT_EQ(dtw_distance(x, x), 0.0);
  EXPECT_EQ(dtw_distance(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 2.0);
  EXPECT_EQ(dtw_distance(std::vector<double>{1}, std::vector<double>{0, 2, 4}), 1.0 + 1.0 + 3.0);
  EXPECT_SSMGAN_ERROR(dtw_distance(std::vector<double>{}, x), ErrorCode::EmptySequence);
}

TEST(Dtw, MatchesExhaustivePaths) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_seq(rng, 1 + rng.index(6));
    const auto b = random_seq(rng, 1 + rng.index(6));
    const double d = dtw_distance(a, b);
    EXPECT_EQ(d, oracle::dtw_exhaustive(a, b));
    EXPECT_EQ(d, dtw_distance(b, a));
    EXPECT_GE(d, 0.0);
  }
}

TEST(Dtw, PathIsMonotoneAndContiguous) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_seq(rng, 2 + rng.index(8));
    const auto b = random_seq(rng, 2 + rng.index(8));
    const auto path = dtw_path(std::span<const double>(a), std::span<const double>(b));
    ASSERT_FALSE(path.empty());
    EXPECT_EQ(path.front(), (std::pair<std::size_t, std::size_t>{0, 0}));
    EXPECT_EQ(path.back(), (std::pair<std::size_t, std::size_t>{a.size() - 1, b.size() - 1}));
    for (std::size_t i = 1; i < path.size(); ++i) {
      const auto di = path[i].first - path[i - 1].first, dj = path[i].second - path[i - 1].second;
      EXPECT_TRUE((di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1));
    }
  }
}

TEST(Emd, Examples) {
  EXPECT_EQ(metrics::emd_1d(std::vector<double>{0}, std::vector<double>{1}), 1.0);
  const std::vector<double> a{0.2, -1.0, 3.0};
  EXPECT_EQ(metrics::emd_1d(a, a), 0.0);
  EXPECT_NEAR(metrics::emd_1d(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}), 0.5, 1e-15);
  EXPECT_NEAR(oracle::transport_cost(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}), 0.5, 1e-15);
  EXPECT_SSMGAN_ERROR(metrics::emd_1d(std::vector<double>{}, a), ErrorCode::EmptySet);
}

TEST(Emd, MatchesTransportOptimum) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.index(5)), b(1 + rng.index(5));
    for (auto& v : a) v = rng.uniform(-2, 2);
    for (auto& v : b) v = rng.uniform(-2, 2);
    EXPECT_NEAR(metrics::emd_1d(a, b), oracle::transport_cost(a, b), 1e-9);
  }
}

TEST(Emd, EqualSizesAreMeanSortedGap) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double expected = 0;
    for (std::size_t i = 0; i < n; ++i) expected += std::abs(sa[i] - sb[i]);
    EXPECT_NEAR(metrics::emd_1d(a, b), expected / static_cast<double>(n), 1e-12);
  }
}

TEST(Emd, TranslationCovariant) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + rng.index(9)), b(1 + rng.index(9));
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double c = rng.uniform(-5, 5);
    auto ac = a, bc = b;
    for (auto& v : ac) v += c;
    for (auto& v : bc) v += c;
    EXPECT_NEAR(metrics::emd_1d(ac, bc), metrics::emd_1d(a, b), 1e-12);
  }
}

TEST(PairedErrors, Examples) {
  const metrics::Beats real{{0.0, 0.0}}, fake{{1.0, 1.0}};
  const auto e = metrics::paired_errors(real, fake);
  EXPECT_EQ(e.mse, 1.0);
  EXPECT_EQ(e.mae, 1.0);
  EXPECT_EQ(e.rmse, 1.0);
  const metrics::Beats set{{1, 2, 3}, {0, 0, 1}, {4, 4, 4}};
  const auto z = metrics::paired_errors(set, set);
  EXPECT_EQ(z.mse, 0.0);
  EXPECT_EQ(z.match, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_SSMGAN_ERROR(metrics::paired_errors({}, fake), ErrorCode::EmptySet);
  EXPECT_SSMGAN_ERROR(metrics::paired_errors(real, {}), ErrorCode::EmptySet);
  EXPECT_SSMGAN_ERROR(metrics::paired_errors(real, {{1.0, 2.0, 3.0}}), ErrorCode::ShapeMismatch);
}

TEST(PairedErrors, NearestMatchAndRmseIdentity) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    metrics::Beats real(1 + rng.index(6), std::vector<double>(7)), fake(1 + rng.index(6), std::vector<double>(7));
    for (auto* s : {&real, &fake}) {
      for (auto& b : *s) {
        for (auto& v : b) v = rng.normal();
      }
    }
    const auto e = metrics::paired_errors(real, fake);
    double se = 0, ae = 0;
    for (std::size_t f = 0; f < fake.size(); ++f) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t r = 0; r < real.size(); ++r) {
        double d = 0;
        for (std::size_t i = 0; i < 7; ++i) d += std::pow(fake[f][i] - real[r][i], 2);
        if (d < best) best = d, arg = r;
      }
      EXPECT_EQ(e.match[f], arg);
      se += best;
      for (std::size_t i = 0; i < 7; ++i) ae += std::abs(fake[f][i] - real[arg][i]);
    }
    const double n = 7.0 * static_cast<double>(fake.size());
    EXPECT_NEAR(e.mse, se / n, 1e-12);
    EXPECT_NEAR(e.mae, ae / n, 1e-12);
    EXPECT_NEAR(e.rmse * e.rmse, e.mse, 1e-12 * std::max(1.0, e.mse));
  }
}

TEST(PairedErrors, ZeroExactlyForSubsets) {
  const metrics::Beats real{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(metrics::paired_errors(real, {{3, 4}, {3, 4}, {1, 2}}).mse, 0.0);
  EXPECT_GT(metrics::paired_errors(real, {{3, 4}, {3, 4.001}}).mse, 0.0);
}

TEST(PairedErrors, MeanVsMean) {
  const metrics::Beats real{{0, 0}, {2, 2}}, fake{{1, 3}};
  const auto e = metrics::paired_errors(real, fake, metrics::Pairing::MeanVsMean);
  EXPECT_EQ(e.mse, 2.0);
  EXPECT_EQ(e.mae, 1.0);
  EXPECT_TRUE(e.match.empty());
}

namespace {

BeatDataset beats_of(const metrics::Beats& rows, int label) {
  BeatDataset d;
  for (const auto& r : rows) {
    Heartbeat b;
    b.label = label;
    b.amp = r;
    b.time = uniform_time_grid(r.size());
    d.beats.push_back(b);
  }
  return d;
}

}  // namespace

TEST(Report, IdenticalSetsAreZero) {
  auto real = beats_of({{0, 1, 0.5}, {0.2, 0.9, 0.1}}, 0);
  auto v = beats_of({{1, 0, -1}}, 1);
  real.beats.insert(real.beats.end(), v.beats.begin(), v.beats.end());
  const auto r = metrics::evaluate_sets(real, real);
  ASSERT_EQ(r.classes.size(), 2u);
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.rmse, 0.0);
    EXPECT_EQ(c.mae, 0.0);
    EXPECT_EQ(c.mse, 0.0);
    EXPECT_EQ(c.emd, 0.0);
    EXPECT_EQ(c.dtw, 0.0);
  }
  EXPECT_EQ(r.classes[0].n_real, 2u);
  EXPECT_EQ(r.classes[1].n_fake, 1u);
  EXPECT_EQ(metrics::report_csv(r), metrics::report_csv(metrics::evaluate_sets(real, real)));
}

TEST(Report, CsvAndJsonLayout) {
  const auto real = beats_of({{0, 0, 0}, {1, 1, 1}}, 0);
  const auto fake = beats_of({{0.5, 0.5, 0.5}}, 0);
  const auto r = metrics::evaluate_sets(real, fake);
  ASSERT_EQ(r.classes.size(), 1u);
  const auto& c = r.classes[0];
  EXPECT_NEAR(c.mse, 0.25, 1e-15);
  EXPECT_NEAR(c.dtw, 1.5, 1e-15);
  EXPECT_NEAR(c.emd, 0.5, 1e-15);
  const auto csv = metrics::report_csv(r);
  EXPECT_NE(csv.find("class,metric,value,n_real,n_fake\n"), std::string::npos);
  EXPECT_NE(csv.find("N,rmse,"), std::string::npos);
  EXPECT_NE(csv.find("N,dtw,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  const auto j = metrics::report_json(r);
  EXPECT_EQ(j.at("pairing"), "nearest-real");
  EXPECT_EQ(j.at("classes")[0].at("class"), "N");
  EXPECT_EQ(j.at("classes")[0].at("n_real"), 2);
  EXPECT_SSMGAN_ERROR(metrics::evaluate_sets(real, beats_of({{1, 1, 1}}, 2)), ErrorCode::EmptySet);
  EXPECT_SSMGAN_ERROR(metrics::evaluate_sets(real, BeatDataset{}), ErrorCode::EmptySet);
}
