#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "mrsl/normal.hpp"
#include "mrsl/parallel.hpp"
#include "mrsl/random.hpp"
#include "oracles.hpp"

using mrsl::CounterRng;

TEST(CounterRng, SameKeyGivesSameStream) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(CounterRng, StartingCounterSkipsAhead) {
  CounterRng a(9);
  for (int i = 0; i < 5; ++i) a();
  CounterRng b(9, 5);
  EXPECT_EQ(a(), b());
}

TEST(CounterRng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(mrsl::derive_seed(7, s));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(mrsl::derive_seed(1, 2), mrsl::derive_seed(2, 1));
}

TEST(CounterRng, UniformStaysInRange) {
  CounterRng r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = r.uniform_open();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(CounterRng, NormalMoments) {
  CounterRng r(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(CounterRng, IndexCoversRangeUniformly) {
  CounterRng r(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = r.index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Normal, CdfMatchesErfc) {
  for (double t = -8.0; t <= 8.0; t += 0.37) {
    EXPECT_NEAR(mrsl::normal_cdf(t), oracle::Phi(t), 1e-15);
    EXPECT_NEAR(mrsl::normal_pdf(t), oracle::phi(t), 1e-15);
  }
  EXPECT_NEAR(mrsl::normal_cdf(1.2816), 0.9, 1e-4);
}

TEST(Normal, LogCdfStableInTail) {
  // Mills ratio asymptotics: log Phi(t) ~ log phi(t) - log(-t) for t << 0.
  const double t = -40.0;
  const double log_phi = -0.5 * t * t - 0.5 * std::log(2.0 * M_PI);
  const double approx = log_phi - std::log(-t) + std::log1p(-1.0 / (t * t));
  EXPECT_NEAR(mrsl::log_normal_cdf(t), approx, 1e-3);
  EXPECT_TRUE(std::isfinite(mrsl::log_normal_cdf(-1e3)));
}

TEST(Normal, IntervalMatchesDifference) {
  EXPECT_NEAR(std::exp(mrsl::log_normal_interval(-1.0, 0.5)), oracle::Phi(0.5) - oracle::Phi(-1.0), 1e-14);
  EXPECT_NEAR(mrsl::log_normal_interval(-INFINITY, INFINITY), 0.0, 1e-15);
  EXPECT_NEAR(std::exp(mrsl::log_normal_interval(7.0, 8.0)), oracle::Phi(-7.0) - oracle::Phi(-8.0), 1e-22);
}

TEST(Normal, QuantileInvertsCdf) {
  for (double p : {1e-10, 0.001, 0.3, 0.5, 0.7, 0.999}) EXPECT_NEAR(oracle::Phi(mrsl::normal_quantile(p)), p, 1e-12 + 1e-9 * p);
  EXPECT_THROW(mrsl::normal_quantile(0.0), std::exception);
}

TEST(ParallelFor, MatchesSerial) {
  std::vector<double> serial(100), threaded(100);
  auto work = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 3.0; };
  mrsl::parallel_for(100, 1, [&](std::size_t i) { serial[i] = work(i); });
  mrsl::parallel_for(100, 4, [&](std::size_t i) { threaded[i] = work(i); });
  EXPECT_EQ(serial, threaded);
}

TEST(ParallelFor, RethrowsLowestIndexError) {
  try {
    mrsl::parallel_for(20, 4, [](std::size_t i) {
      if (i == 3 || i == 15) throw std::runtime_error("item " + std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "item 3");
  }
}
