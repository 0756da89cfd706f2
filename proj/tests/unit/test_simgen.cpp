#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "fixtures.hpp"
#include "mrsl/data.hpp"
#include "mrsl/error.hpp"
#include "mrsl/multires.hpp"
#include "mrsl/normal.hpp"
#include "mrsl/simgen.hpp"
#include "oracles.hpp"

using namespace mrsl;

namespace {

// Standard normal quantile by bisection on the oracle CDF.
double probit_of(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::Phi(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SimConfig tiny_field(SimConfig c) {
  c.matern.variance = 1e-12;
  c.region_cov.setZero();
  c.subject_var = 0.0;
  return c;
}

}  // namespace

TEST(Matern, ClosedFormsAtHalfIntegers) {
  for (double d : {0.01, 0.1, 0.3, 1.0, 2.5}) {
    EXPECT_NEAR(matern_cov(d, {2.0, 0.4, 0.5}), oracle::matern_half(d, 2.0, 0.4), 1e-12);
    EXPECT_NEAR(matern_cov(d, {3.0, 0.7, 1.5}), oracle::matern_three_halves(d, 3.0, 0.7), 1e-12);
  }
}

TEST(Matern, VarianceAtZeroAndMonotone) {
  for (double nu : {0.3, 0.8, 1.5, 2.7}) {
    const MaternParams t{4.0, 0.2, nu};
    EXPECT_EQ(matern_cov(0.0, t), 4.0);
    double prev = 4.0;
    for (double d = 0.005; d < 2.0; d += 0.005) {
      const double c = matern_cov(d, t);
      EXPECT_LE(c, prev + 1e-12);
      EXPECT_GE(c, 0.0);
      prev = c;
    }
    EXPECT_NEAR(matern_cov(1e-7, t), 4.0, 1e-3);
  }
}

TEST(Matern, CoordOverloadUsesEuclideanDistance) {
  const MaternParams t{1.0, 0.3, 0.8};
  EXPECT_DOUBLE_EQ(matern_cov(Coord{0.0, 0.0}, Coord{0.3, 0.4}, t), matern_cov(0.5, t));
}

TEST(Matern, InvalidParameters) {
  EXPECT_THROW(matern_cov(0.1, {1.0, 0.2, 0.0}), ConfigError);
  EXPECT_THROW(matern_cov(0.1, {1.0, -0.2, 0.5}), ConfigError);
  EXPECT_THROW(matern_cov(0.1, {0.0, 0.2, 0.5}), ConfigError);
  try {
    validate(MaternParams{1.0, 0.2, -1.0});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "matern.smoothness");
  }
}

TEST(SampleGp, DeterministicInSeed) {
  const std::vector<Coord> c{{0, 0}, {0.1, 0}, {0.5, 0.5}};
  const MaternParams t{2.0, 0.3, 0.8};
  EXPECT_EQ(sample_gp(c, t, 5), sample_gp(c, t, 5));
  EXPECT_NE(sample_gp(c, t, 5), sample_gp(c, t, 6));
}

TEST(SampleGp, SinglePointVariance) {
  const std::vector<Coord> c{{0.2, 0.1}};
  const MaternParams t{3.0, 0.2, 0.8};
  double sum = 0.0, sum2 = 0.0;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    const double w = sample_gp(c, t, static_cast<std::uint64_t>(r) + 1)[0];
    sum += w;
    sum2 += w * w;
  }
  const double mean = sum / reps;
  const double var = sum2 / reps - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var / 3.0, 1.0, 0.03);
}

TEST(SampleGp, DistantPointsDecorrelate) {
  const std::vector<Coord> c{{-1.0, -1.0}, {1.0, 1.0}};
  const MaternParams t{1.0, 0.1, 0.5};
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int r = 0; r < 20000; ++r) {
    const auto w = sample_gp(c, t, static_cast<std::uint64_t>(r) + 7);
    sxy += w[0] * w[1];
    sxx += w[0] * w[0];
    syy += w[1] * w[1];
  }
  EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.05);
}

TEST(SampleGp, EmpiricalCovarianceMatchesKernel) {
  std::vector<Coord> c;
  for (int i = 0; i < 20; ++i) c.push_back({-0.9 + 0.09 * i, 0.3 * std::sin(i)});
  const MaternParams t{1.0, 0.5, 1.5};
  const int reps = 20000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(20, 20);
  for (int r = 0; r < reps; ++r) {
    const auto w = sample_gp(c, t, static_cast<std::uint64_t>(r) + 11);
    const Eigen::Map<const Eigen::VectorXd> v(w.data(), 20);
    acc += v * v.transpose();
  }
  acc /= reps;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const double expected = matern_cov(c[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(j)], t);
      if (i == j) EXPECT_NEAR(acc(i, j) / expected, 1.0, 0.05);
      else EXPECT_NEAR(acc(i, j), expected, 0.05);
    }
}

TEST(SampleGp, DuplicatePointsNeedJitterOnly) {
  const std::vector<Coord> c{{0.1, 0.1}, {0.1, 0.1}, {0.4, 0.2}};
  const auto w = sample_gp(c, {1.0, 0.3, 1.5}, 3);
  EXPECT_NEAR(w[0], w[1], 1e-3);
}

TEST(SampleGp, JitterScheduleExhausted) {
  const std::vector<Coord> c{{0.1, 0.1}, {0.1, 0.1}};
  const std::vector<double> none{0.0};
  EXPECT_THROW(sample_gp(c, {1.0, 0.3, 1.5}, 3, none), FitError);
}

TEST(Shape, VoxelCountNearTarget) {
  ShapeSpec spec;
  spec.n_target = 2500;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto shape = generate_shape(spec, s);
    EXPECT_NEAR(static_cast<double>(shape.coords.size()), 2500.0, 250.0);
    EXPECT_EQ(shape.zone.size(), shape.coords.size());
    for (const auto& p : shape.coords) {
      EXPECT_GE(p.x, -1.0);
      EXPECT_LE(p.x, 1.0);
      EXPECT_GE(p.y, -1.0);
      EXPECT_LE(p.y, 1.0);
    }
  }
}

TEST(Shape, InnerFractionExtremes) {
  ShapeSpec spec;
  spec.n_target = 400;
  spec.inner_fraction = 0.0;
  for (int z : generate_shape(spec, 3).zone) EXPECT_EQ(z, kCentralGland);
  spec.inner_fraction = 1.0;
  for (int z : generate_shape(spec, 3).zone) EXPECT_EQ(z, kPeripheralZone);
}

TEST(Shape, InnerShareRoughlyMatches) {
  ShapeSpec spec;
  spec.n_target = 3000;
  spec.inner_fraction = 0.3;
  const auto shape = generate_shape(spec, 8);
  const double share = std::accumulate(shape.zone.begin(), shape.zone.end(), 0.0) /
                       static_cast<double>(shape.zone.size());
  EXPECT_NEAR(share, 0.3, 0.05);
}

TEST(Shape, InvalidSpecs) {
  ShapeSpec spec;
  spec.inner_fraction = 1.5;
  EXPECT_THROW(generate_shape(spec, 1), ConfigError);
  spec = {};
  spec.n_target = 0;
  EXPECT_THROW(generate_shape(spec, 1), ConfigError);
}

TEST(Shape, LoadFromFile) {
  const auto dir = fixture::scratch_dir("shapes");
  const auto path = dir / "shapes.csv";
  {
    std::ofstream out(path);
    out << "shape,x,y,zone\na,0,0,0\na,2,0,1\na,0,4,0\nb,1,1,1\nb,3,3,0\n";
  }
  const auto shapes = load_shapes(path);
  ASSERT_EQ(shapes.size(), 2u);
  EXPECT_EQ(shapes[0].coords.size(), 3u);
  EXPECT_EQ(shapes[1].zone, (std::vector<int>{1, 0}));
  {
    std::ofstream out(path);
    out << "shape,x,y,zone\na,0,zero,0\n";
  }
  EXPECT_THROW(load_shapes(path), ParseError);
}

TEST(Simulate, BinaryPrevalenceWithoutField) {
  auto c = tiny_field(fixture::small_config("strong-hetero-moderate-spatial", 61, 20, 400));
  const double q = probit_of(0.3);
  c.q = {q, q};
  const auto data = simulate_binary_dataset(c);
  double pos = 0.0;
  for (const auto& s : data.subjects)
    for (int v : s.cancer) pos += v;
  const double n = static_cast<double>(data.total_voxels());
  EXPECT_NEAR(pos / n, 0.3, 3.0 * std::sqrt(0.21 / n));
}

TEST(Simulate, FeatureMeansFollowClassAndZone) {
  auto c = tiny_field(fixture::small_config("strong-hetero-moderate-spatial", 62, 30, 400));
  const auto data = simulate_binary_dataset(c);
  for (int cls = 0; cls < 2; ++cls)
    for (int zone = 0; zone < 2; ++zone) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(c.dim());
      double n = 0.0;
      for (const auto& s : data.subjects)
        for (std::size_t j = 0; j < s.size(); ++j)
          if (s.cancer[j] == cls && s.zone[j] == zone) {
            sum += s.features.row(static_cast<Eigen::Index>(j)).transpose();
            n += 1.0;
          }
      ASSERT_GT(n, 50.0);
      const Eigen::VectorXd mean = sum / n;
      const Eigen::VectorXd& expected = c.mean[static_cast<std::size_t>(cls)][static_cast<std::size_t>(zone)];
      for (int f = 0; f < c.dim(); ++f) EXPECT_NEAR(mean[f], expected[f], 4.0 / std::sqrt(n));
    }
}

TEST(Simulate, DeterministicAndParallelSafe) {
  const auto c = fixture::small_config("strong-hetero-strong-spatial", 63, 5, 150);
  const auto a = simulate_dataset(c, 1);
  const auto b = simulate_dataset(c, 3);
  ASSERT_EQ(a.subjects.size(), b.subjects.size());
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    EXPECT_TRUE(a.subjects[i].features == b.subjects[i].features);
    EXPECT_EQ(a.subjects[i].cancer, b.subjects[i].cancer);
    EXPECT_EQ(a.subjects[i].id, b.subjects[i].id);
  }
  auto other = c;
  other.seed = 64;
  EXPECT_FALSE(simulate_dataset(other).subjects[0].features == a.subjects[0].features);
}

TEST(Simulate, OrdinalProportionsExact) {
  const auto c = fixture::small_config("ordinal-strong-hetero-strong-spatial", 65, 6, 200);
  const auto data = simulate_ordinal_dataset(c);
  std::vector<double> counts(3, 0.0);
  for (const auto& s : data.subjects)
    for (std::size_t j = 0; j < s.size(); ++j) {
      counts[static_cast<std::size_t>(s.grade[j] - 1)] += 1.0;
      EXPECT_EQ(s.cancer[j], s.grade[j] > 1 ? 1 : 0);
    }
  const double n = static_cast<double>(data.total_voxels());
  EXPECT_LE(std::abs(counts[0] - std::round(c.p1 * n)), 1.0);
  EXPECT_LE(std::abs(counts[0] + counts[1] - std::round(c.p2 * n)), 1.0);
  EXPECT_EQ(data.num_levels, 3);
}

TEST(Simulate, NearlyEmptyMiddleCategory) {
  auto c = fixture::small_config("ordinal-strong-hetero-strong-spatial", 66, 4, 200);
  c.p1 = 0.5;
  c.p2 = 0.5005;
  const auto data = simulate_ordinal_dataset(c);
  int middle = 0;
  for (const auto& s : data.subjects)
    for (int g : s.grade) middle += g == 2;
  EXPECT_LE(middle, 2);
}

TEST(Simulate, RegionShiftsSharedAcrossSubjects) {
  auto c = tiny_field(fixture::small_config("strong-hetero-moderate-spatial", 67, 2, 300));
  c.region_cov = Eigen::MatrixXd::Identity(c.dim(), c.dim());
  c.cov.assign(2, {Eigen::MatrixXd::Zero(c.dim(), c.dim()), Eigen::MatrixXd::Zero(c.dim(), c.dim())});
  for (auto& m : c.mean) m[1] = m[0];
  const auto data = simulate_binary_dataset(c);
  const auto shifts = draw_region_shifts(c);
  for (const auto& s : data.subjects)
    for (std::size_t j = 0; j < s.size(); ++j) {
      Eigen::VectorXd mu = c.mean[static_cast<std::size_t>(s.cancer[j])][0];
      for (std::size_t k = 0; k < shifts.size(); ++k)
        mu += shifts[k][static_cast<std::size_t>(region_index(s.coords[j], c.shift_resolutions[k]) - 1)];
      EXPECT_LT((s.features.row(static_cast<Eigen::Index>(j)).transpose() - mu).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Simulate, ShiftCountsPerResolution) {
  const auto c = sim_preset("strong-hetero-strong-spatial");
  const auto shifts = draw_region_shifts(c);
  ASSERT_EQ(shifts.size(), 3u);
  EXPECT_EQ(shifts[0].size(), 1u);
  EXPECT_EQ(shifts[1].size(), 4u);
  EXPECT_EQ(shifts[2].size(), 9u);
}

TEST(Simulate, SubjectCount) {
  const auto c = fixture::small_config("strong-hetero-moderate-spatial", 68, 7, 100);
  EXPECT_EQ(simulate_dataset(c).subjects.size(), 7u);
}

TEST(SimConfig, ValidationNamesField) {
  auto expect_field = [](SimConfig c, const std::string& field) {
    try {
      validate(c);
      ADD_FAILURE() << "no error for " << field;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  const auto base = sim_preset("strong-hetero-strong-spatial");
  auto c = base;
  c.matern.smoothness = 0.0;
  expect_field(c, "matern.smoothness");
  c = base;
  c.subjects = 0;
  expect_field(c, "subjects");
  c = base;
  c.p1 = 0.8;
  expect_field(c, "p1");
  c = base;
  c.cov[0][0](0, 0) = -1.0;
  expect_field(c, "cov");
  c = base;
  c.region_cov.resize(2, 2);
  expect_field(c, "region_cov");
  c = base;
  c.subject_var = -0.1;
  expect_field(c, "subject_var");
}

TEST(SimConfig, PresetsAreValid) {
  const auto names = sim_preset_names();
  EXPECT_EQ(names.size(), 8u);
  for (const auto& n : names) EXPECT_NO_THROW(validate(sim_preset(n))) << n;
  EXPECT_EQ(sim_preset("ordinal-moderate-hetero-moderate-spatial").num_levels, 3);
  EXPECT_THROW(sim_preset("weak-hetero"), ConfigError);
}

TEST(SimConfig, JsonRoundTrip) {
  auto c = sim_preset("ordinal-strong-hetero-moderate-spatial");
  c.seed = 77;
  c.subject_var = 0.3;
  const auto back = sim_config_from_json(nlohmann::json::parse(sim_config_to_json(c).dump()));
  EXPECT_EQ(sim_config_to_json(back), sim_config_to_json(c));
}

TEST(SimConfig, PresetPlusOverrides) {
  const auto c = sim_config_from_json(nlohmann::json{{"preset", "strong-hetero-strong-spatial"},
                                                     {"subjects", 5},
                                                     {"matern", {{"range", 0.3}}}});
  EXPECT_EQ(c.subjects, 5);
  EXPECT_EQ(c.matern.range, 0.3);
  EXPECT_EQ(c.matern.variance, sim_preset("strong-hetero-strong-spatial").matern.variance);
  EXPECT_THROW(sim_config_from_json(nlohmann::json{{"matern", {{"smoothness", -1}}}}), ConfigError);
}
