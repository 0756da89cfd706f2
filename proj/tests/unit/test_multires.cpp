#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mrsl/error.hpp"
#include "mrsl/multires.hpp"
#include "mrsl/random.hpp"
#include "oracles.hpp"

using namespace mrsl;

namespace {

// Pools every voxel of the dataset into one design matrix.
void pool(const Dataset& data, Target target, Eigen::MatrixXd& x, std::vector<int>& y) {
  x.resize(static_cast<Eigen::Index>(data.total_voxels()), static_cast<Eigen::Index>(data.dim()));
  y.clear();
  Eigen::Index r = 0;
  for (const auto& s : data.subjects)
    for (std::size_t j = 0; j < s.size(); ++j) {
      x.row(r++) = s.features.row(static_cast<Eigen::Index>(j));
      y.push_back(class_label(s, j, target));
    }
}

}  // namespace

TEST(RegionIndex, QuadrantExample) { EXPECT_EQ(region_index({0.5, -0.2}, 2), 3); }

TEST(RegionIndex, WholeGland) {
  for (double x : {-0.99, 0.0, 0.7}) EXPECT_EQ(region_index({x, -x}, 1), 1);
}

TEST(RegionIndex, ThreeByThreeFormula) { EXPECT_EQ(region_index({-0.9, 0.9}, 3), 3); }

TEST(RegionIndex, HalfOpenEdges) {
  EXPECT_EQ(region_index({0.0, 0.0}, 2), 4);  // lower edge belongs to the upper cell
  EXPECT_EQ(region_index({-0.999, -0.999}, 2), 1);
  EXPECT_EQ(region_index({0.999, 0.999}, 3), 9);
}

TEST(RegionIndex, OutsideSquareIsError) {
  EXPECT_THROW(region_index({-1.0, 0.0}, 2), Error);
  EXPECT_THROW(region_index({0.0, 1.0}, 2), Error);
}

TEST(RegionIndex, PartitionCountsSumToImageSize) {
  const auto data = fixture::small_binary(21, 2, 200);
  for (const auto& s : data.subjects)
    for (int k = 1; k <= 4; ++k) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(k * k), 0);
      for (const auto& c : s.coords) {
        const int l = region_index(c, k);
        ASSERT_GE(l, 1);
        ASSERT_LE(l, k * k);
        ++counts[static_cast<std::size_t>(l - 1)];
      }
      std::size_t total = 0;
      for (auto c : counts) total += c;
      EXPECT_EQ(total, s.size());
    }
}

TEST(MultiRes, LearnerCount) {
  const auto data = fixture::small_binary(22, 4, 150);
  const auto m = fit_multiresolution(data, LearnerSpec{}, 3, Target::Binary);
  EXPECT_EQ(m.size(), 14u);
  EXPECT_EQ(MultiResModel::offset(3), 5u);
  EXPECT_THROW(m.learner(4, 1), std::exception);
}

TEST(MultiRes, SingleResolutionIsTheBaseLearner) {
  const auto data = fixture::small_binary(23, 4, 150);
  const auto m = fit_multiresolution(data, LearnerSpec{}, 1, Target::Binary);
  Eigen::MatrixXd x;
  std::vector<int> y;
  pool(data, Target::Binary, x, y);
  const auto base = fit_learner(LearnerSpec{}, x, y, 2);
  for (const auto& s : data.subjects) {
    const auto pred = predict_multiresolution(m, s);
    ASSERT_EQ(pred.size(), 1u);
    EXPECT_TRUE(pred[0] == base.predict_proba(s.features));
  }
}

TEST(MultiRes, AllCancerCellIsConstantOne) {
  auto data = fixture::small_binary(24, 3, 150);
  // Mark every voxel of the k = 2 cell 1 as cancer.
  for (auto& s : data.subjects)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (region_index(s.coords[j], 2) == 1) {
        s.cancer[j] = 1;
        s.grade[j] = 2;
      }
  const auto m = fit_multiresolution(data, LearnerSpec{}, 2, Target::Binary);
  ASSERT_TRUE(m.learner(2, 1).constant_class().has_value());
  EXPECT_EQ(*m.learner(2, 1).constant_class(), 1);
  for (const auto& s : data.subjects) {
    const auto pred = predict_multiresolution(m, s);
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (region_index(s.coords[j], 2) == 1) {
        EXPECT_EQ(pred[1](static_cast<Eigen::Index>(j), 1), 1.0);
      }
    }
  }
}

TEST(MultiRes, EmptyCellPredictsPrevalence) {
  auto data = fixture::small_binary(25, 3, 150);
  // Drop every voxel in the upper-right quadrant.
  for (auto& s : data.subjects) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (region_index(s.coords[j], 2) != 4) keep.push_back(j);
    SubjectImage t;
    t.id = s.id;
    t.features.resize(static_cast<Eigen::Index>(keep.size()), s.features.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      t.coords.push_back(s.coords[keep[r]]);
      t.zone.push_back(s.zone[keep[r]]);
      t.cancer.push_back(s.cancer[keep[r]]);
      t.grade.push_back(s.grade[keep[r]]);
      t.features.row(static_cast<Eigen::Index>(r)) = s.features.row(static_cast<Eigen::Index>(keep[r]));
    }
    s = t;
  }
  double positives = 0.0;
  for (const auto& s : data.subjects)
    for (int c : s.cancer) positives += c;
  const double prevalence = positives / static_cast<double>(data.total_voxels());
  const auto m = fit_multiresolution(data, LearnerSpec{}, 2, Target::Binary);
  const auto p = m.learner(2, 4).predict_proba(std::vector<double>(data.dim(), 0.0));
  EXPECT_NEAR(p[1], prevalence, 1e-12);
}

TEST(MultiRes, HandBuiltTwoVoxelSubject) {
  LearnerSpec spec;
  std::vector<FittedLearner> learners;
  learners.emplace_back(spec, 2, 1, ProbitParams{0.1, Eigen::VectorXd::Constant(1, 0.5)});   // k=1
  learners.emplace_back(spec, 2, 1, ProbitParams{-0.3, Eigen::VectorXd::Constant(1, 1.0)});  // k=2, l=1
  learners.emplace_back(spec, 2, 1, ProbitParams{0.0, Eigen::VectorXd::Constant(1, 0.0)});
  learners.emplace_back(spec, 2, 1, ProbitParams{0.0, Eigen::VectorXd::Constant(1, 0.0)});
  learners.emplace_back(spec, 2, 1, ProbitParams{0.7, Eigen::VectorXd::Constant(1, -2.0)});  // k=2, l=4
  const MultiResModel model(spec, 2, Target::Binary, 2, 1, std::move(learners));
  Eigen::MatrixXd y(2, 1);
  y << 0.4, -1.1;
  const auto s = oracle::make_subject("h", {{-0.5, -0.5}, {0.5, 0.5}}, y, {0, 1});
  const auto pred = predict_multiresolution(model, s);
  EXPECT_NEAR(pred[0](0, 1), oracle::Phi(0.1 + 0.5 * 0.4), 1e-15);
  EXPECT_NEAR(pred[0](1, 1), oracle::Phi(0.1 + 0.5 * -1.1), 1e-15);
  EXPECT_NEAR(pred[1](0, 1), oracle::Phi(-0.3 + 0.4), 1e-15);
  EXPECT_NEAR(pred[1](1, 1), oracle::Phi(0.7 + 2.2), 1e-15);
}

TEST(MultiRes, VoxelPermutationPermutesOutputs) {
  const auto data = fixture::small_binary(26, 3, 120);
  const auto m = fit_multiresolution(data, LearnerSpec{}, 3, Target::Binary);
  const auto& s = data.subjects[0];
  SubjectImage r = s;
  const auto n = static_cast<Eigen::Index>(s.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = static_cast<std::size_t>(n - 1 - j);
    r.coords[static_cast<std::size_t>(j)] = s.coords[src];
    r.features.row(j) = s.features.row(n - 1 - j);
  }
  const auto a = predict_multiresolution(m, s);
  const auto b = predict_multiresolution(m, r);
  for (std::size_t k = 0; k < 3; ++k)
    for (Eigen::Index j = 0; j < n; ++j) EXPECT_EQ(a[k](j, 1), b[k](n - 1 - j, 1));
}

TEST(MultiRes, OrdinalTargetHasZColumns) {
  const auto data = fixture::small_ordinal(27, 3, 150);
  const auto m = fit_multiresolution(data, LearnerSpec{}, 2, Target::Ordinal);
  EXPECT_EQ(m.num_classes(), 3);
  const auto pred = predict_multiresolution(m, data.subjects[0]);
  EXPECT_EQ(pred[1].cols(), 3);
}

TEST(MultiRes, ParallelFitMatchesSerial) {
  const auto data = fixture::small_binary(28, 3, 150);
  LearnerSpec rf;
  rf.kind = LearnerKind::RandomForest;
  rf.trees = 10;
  const auto a = fit_multiresolution(data, rf, 3, Target::Binary, 1);
  const auto b = fit_multiresolution(data, rf, 3, Target::Binary, 4);
  EXPECT_EQ(multires_to_json(a).dump(), multires_to_json(b).dump());
}

TEST(MultiRes, JsonRoundTrip) {
  const auto data = fixture::small_binary(29, 3, 150);
  LearnerSpec qda;
  qda.kind = LearnerKind::QDA;
  const auto m = fit_multiresolution(data, qda, 3, Target::Binary);
  const auto back = multires_from_json(nlohmann::json::parse(multires_to_json(m).dump()));
  const auto a = predict_multiresolution(m, data.subjects[1]);
  const auto b = predict_multiresolution(back, data.subjects[1]);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(a[k] == b[k]);
}

TEST(MultiRes, DimensionMismatch) {
  const auto data = fixture::small_binary(30, 2, 100);
  const auto m = fit_multiresolution(data, LearnerSpec{}, 1, Target::Binary);
  auto s = data.subjects[0];
  s.features.conservativeResize(Eigen::NoChange, 2);
  EXPECT_THROW(predict_multiresolution(m, s), DimensionError);
}
