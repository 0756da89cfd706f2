#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrsl/error.hpp"
#include "mrsl/metrics.hpp"
#include "mrsl/random.hpp"
#include "mrsl/smoothing.hpp"
#include "oracles.hpp"

using namespace mrsl;

namespace {

std::vector<Coord> random_coords(CounterRng& rng, std::size_t n) {
  std::vector<Coord> c(n);
  for (auto& p : c) p = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
  return c;
}

// Image on a lattice with small disks of positives; raw scores are a weak
// noisy signal of the label.
struct Image {
  std::vector<Coord> coords;
  std::vector<int> labels;
  std::vector<Eigen::MatrixXd> proba;
};

Image clustered_image(std::uint64_t seed) {
  CounterRng rng(seed);
  Image img;
  std::vector<Coord> centers;
  for (int c = 0; c < 6; ++c) centers.push_back({1.6 * rng.uniform() - 0.8, 1.6 * rng.uniform() - 0.8});
  Eigen::MatrixXd p(0, 2);
  std::vector<double> score;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) {
      const Coord s{-0.975 + 0.05 * i, -0.975 + 0.05 * j};
      int label = 0;
      for (const auto& c : centers)
        if (std::hypot(s.x - c.x, s.y - c.y) < 0.12) label = 1;
      img.coords.push_back(s);
      img.labels.push_back(label);
      score.push_back(std::clamp(0.5 + 0.15 * (2 * label - 1) + 0.3 * rng.normal(), 0.0, 1.0));
    }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(score.size()), 2);
  for (std::size_t k = 0; k < score.size(); ++k) {
    m(static_cast<Eigen::Index>(k), 1) = score[k];
    m(static_cast<Eigen::Index>(k), 0) = 1.0 - score[k];
  }
  img.proba = {m};
  return img;
}

}  // namespace

TEST(NwSmooth, ConstantIsPreserved) {
  CounterRng rng(1);
  const auto c = random_coords(rng, 50);
  const std::vector<double> v(50, 0.37);
  for (double h : {0.01, 0.2, 5.0})
    for (double x : nw_smooth(v, c, h)) EXPECT_NEAR(x, 0.37, 1e-15);
}

TEST(NwSmooth, SingleVoxelIdentity) {
  const std::vector<Coord> c{{0.1, 0.2}};
  EXPECT_EQ(nw_smooth(std::vector<double>{0.8}, c, 0.3), (std::vector<double>{0.8}));
}

TEST(NwSmooth, TwoVoxelHandArithmetic) {
  const std::vector<Coord> c{{0.0, 0.0}, {1.0, 0.0}};
  const auto out = nw_smooth(std::vector<double>{0.0, 1.0}, c, 1.0);
  const double w = std::exp(-0.5);
  EXPECT_NEAR(out[0], w / (1.0 + w), 1e-15);
  EXPECT_NEAR(out[1], 1.0 / (1.0 + w), 1e-15);
  EXPECT_NEAR(out[0], 0.3775, 1e-4);
}

TEST(NwSmooth, ConvexCombinationBounds) {
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_coords(rng, 100);
    std::vector<double> v(100);
    for (double& x : v) x = rng.normal();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (double x : nw_smooth(v, c, 0.05 + rng.uniform())) {
      EXPECT_GE(x, *lo - 1e-15);
      EXPECT_LE(x, *hi + 1e-15);
    }
  }
}

TEST(NwSmooth, TinyBandwidthIsIdentity) {
  std::vector<Coord> c;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) c.push_back({-0.95 + 0.02 * i, -0.95 + 0.02 * j});
  CounterRng rng(3);
  std::vector<double> v(c.size());
  for (double& x : v) x = rng.uniform();
  const auto out = nw_smooth(v, c, 1e-6);
  for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(out[j], v[j], 1e-9);
}

TEST(NwSmooth, HugeBandwidthIsMean) {
  CounterRng rng(4);
  const auto c = random_coords(rng, 300);
  std::vector<double> v(300);
  for (double& x : v) x = rng.uniform();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 300.0;
  for (double x : nw_smooth(v, c, 1e6)) EXPECT_NEAR(x, mean, 1e-9);
}

TEST(NwSmooth, CommutesWithShift) {
  CounterRng rng(5);
  const auto c = random_coords(rng, 80);
  std::vector<double> v(80), shifted(80);
  for (std::size_t j = 0; j < 80; ++j) {
    v[j] = rng.normal();
    shifted[j] = v[j] + 2.5;
  }
  const auto a = nw_smooth(v, c, 0.1);
  const auto b = nw_smooth(shifted, c, 0.1);
  for (std::size_t j = 0; j < 80; ++j) EXPECT_NEAR(b[j], a[j] + 2.5, 1e-12);
}

TEST(NwSmooth, MatchesDirectKernelSum) {
  CounterRng rng(6);
  const auto c = random_coords(rng, 40);
  std::vector<double> v(40);
  for (double& x : v) x = rng.normal();
  const double h = 0.3;
  const auto out = nw_smooth(v, c, h);
  for (std::size_t j = 0; j < 40; ++j) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < 40; ++k) {
      const double d2 = std::pow(c[j].x - c[k].x, 2) + std::pow(c[j].y - c[k].y, 2);
      const double w = std::exp(-d2 / (2 * h * h));
      num += w * v[k];
      den += w;
    }
    EXPECT_NEAR(out[j], num / den, 1e-13);
  }
}

TEST(NwSmooth, ColumnsShareWeights) {
  CounterRng rng(7);
  const auto c = random_coords(rng, 30);
  Eigen::MatrixXd m(30, 2);
  for (Eigen::Index j = 0; j < 30; ++j) m(j, 0) = rng.normal(), m(j, 1) = rng.normal();
  const Eigen::MatrixXd out = nw_smooth_columns(m, c, 0.2);
  std::vector<double> col1(m.col(1).data(), m.col(1).data() + 30);
  const auto direct = nw_smooth(col1, c, 0.2);
  for (Eigen::Index j = 0; j < 30; ++j) EXPECT_NEAR(out(j, 1), direct[static_cast<std::size_t>(j)], 1e-15);
}

TEST(NwSmooth, ProbaRowsStayNormalized) {
  CounterRng rng(8);
  const auto c = random_coords(rng, 60);
  Eigen::MatrixXd p(60, 3);
  for (Eigen::Index j = 0; j < 60; ++j) {
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    p.row(j) << a, b, 1 - a - b;
  }
  const Eigen::MatrixXd out = nw_smooth_proba(p, c, 0.3);
  for (Eigen::Index j = 0; j < 60; ++j) {
    EXPECT_NEAR(out.row(j).sum(), 1.0, 1e-12);
    EXPECT_GE(out.row(j).minCoeff(), 0.0);
  }
}

TEST(NwSmooth, RejectsBadBandwidth) {
  const std::vector<Coord> c{{0, 0}};
  EXPECT_THROW(nw_smooth(std::vector<double>{1.0}, c, 0.0), Error);
  EXPECT_THROW(nw_smooth(std::vector<double>{1.0, 2.0}, c, 1.0), Error);
}

TEST(SelectBandwidths, SingletonGrid) {
  const auto img = clustered_image(11);
  const ImagePredictions ip{img.coords, img.proba, img.labels};
  const std::vector<double> grid{0.07};
  const auto set = select_bandwidths(std::span(&ip, 1), grid, BandwidthCriterion::MaxAuc);
  EXPECT_EQ(set.h, (std::vector<double>{0.07}));
}

TEST(SelectBandwidths, TiesGoToSmallestBandwidth) {
  // One voxel per image: smoothing is the identity, so every h scores the same.
  CounterRng rng(12);
  std::vector<std::vector<Coord>> coords;
  std::vector<std::vector<Eigen::MatrixXd>> proba;
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 10; ++i) {
    const double p = rng.uniform();
    coords.push_back({{0.1 * i - 0.5, 0.0}});
    Eigen::MatrixXd m(1, 2);
    m << 1.0 - p, p;
    proba.push_back({m});
    labels.push_back({i % 2});
  }
  std::vector<ImagePredictions> ips;
  for (int i = 0; i < 10; ++i) ips.push_back({coords[static_cast<std::size_t>(i)], proba[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(i)]});
  const std::vector<double> grid{0.3, 0.05, 0.1};
  for (auto crit : {BandwidthCriterion::MaxAuc, BandwidthCriterion::MinError}) {
    const auto set = select_bandwidths(ips, grid, crit);
    EXPECT_EQ(set.at(1), 0.05);
  }
}

TEST(SelectBandwidths, OversmoothingLoses) {
  std::vector<Image> images;
  for (std::uint64_t s = 0; s < 3; ++s) images.push_back(clustered_image(100 + s));
  std::vector<ImagePredictions> ips;
  for (const auto& im : images) ips.push_back({im.coords, im.proba, im.labels});
  const std::vector<double> grid{0.05, 0.5};
  const auto set = select_bandwidths(ips, grid, BandwidthCriterion::MaxAuc);
  EXPECT_EQ(set.at(1), 0.05);
  // Reported scores equal pooled AUCs of the smoothed scores.
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& im : images) {
      std::vector<double> raw(im.proba[0].col(1).data(), im.proba[0].col(1).data() + im.proba[0].rows());
      const auto sm = nw_smooth(raw, im.coords, grid[g]);
      scores.insert(scores.end(), sm.begin(), sm.end());
      labels.insert(labels.end(), im.labels.begin(), im.labels.end());
    }
    EXPECT_NEAR(set.scores[0][g], oracle::pairwise_auc(scores, labels), 1e-12);
  }
  EXPECT_GT(set.scores[0][0], set.scores[0][1]);
}

TEST(SelectBandwidths, ParallelMatchesSerial) {
  std::vector<Image> images;
  for (std::uint64_t s = 0; s < 4; ++s) images.push_back(clustered_image(200 + s));
  std::vector<ImagePredictions> ips;
  for (const auto& im : images) ips.push_back({im.coords, im.proba, im.labels});
  const auto grid = default_bandwidth_grid();
  const auto a = select_bandwidths(ips, grid, BandwidthCriterion::MinError, 1);
  const auto b = select_bandwidths(ips, grid, BandwidthCriterion::MinError, 3);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.scores, b.scores);
}

TEST(SelectBandwidths, JsonRoundTrip) {
  BandwidthSet set;
  set.h = {0.05, 0.1, 0.2};
  set.criterion = BandwidthCriterion::MinError;
  set.scores = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
  const auto back = bandwidths_from_json(bandwidths_to_json(set));
  EXPECT_EQ(back.h, set.h);
  EXPECT_EQ(back.criterion, set.criterion);
  EXPECT_EQ(back.scores, set.scores);
}
