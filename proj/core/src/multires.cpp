#include "mrsl/multires.hpp"

#include <algorithm>
#include <cmath>

#include "mrsl/error.hpp"
#include "mrsl/parallel.hpp"
#include "mrsl/random.hpp"

namespace mrsl {

std::string_view to_string(Target target) noexcept {
  return target == Target::Binary ? "binary" : "ordinal";
}

Target target_from_string(std::string_view name) {
  if (name == "binary") return Target::Binary;
  if (name == "ordinal") return Target::Ordinal;
  throw ConfigError("target", "expected 'binary' or 'ordinal', got '" + std::string(name) + "'");
}

int num_classes_for(Target target, int num_levels) noexcept {
  return target == Target::Binary ? 2 : num_levels;
}

int class_label(const SubjectImage& subject, std::size_t j, Target target) noexcept {
  return target == Target::Binary ? subject.cancer[j] : subject.grade[j] - 1;
}

int region_index(Coord s, int k) {
  if (k < 1) throw Error("region_index: resolution must be >= 1");
  if (!(s.x > -1.0 && s.x < 1.0 && s.y > -1.0 && s.y < 1.0))
    throw Error("region_index: coordinate outside (-1,1)^2");
  auto axis = [k](double v) {
    const int i = static_cast<int>(std::floor((v + 1.0) * k / 2.0));
    return std::clamp(i, 0, k - 1);
  };
  return axis(s.x) * k + axis(s.y) + 1;
}

MultiResModel::MultiResModel(LearnerSpec spec, int max_resolution, Target target,
                             int num_classes, int dim, std::vector<FittedLearner> learners)
    : spec_(spec),
      max_resolution_(max_resolution),
      target_(target),
      num_classes_(num_classes),
      dim_(dim),
      learners_(std::move(learners)) {
  if (learners_.size() != offset(max_resolution_ + 1))
    throw Error("MultiResModel: learner map is incomplete");
}

std::size_t MultiResModel::offset(int k) noexcept {
  std::size_t total = 0;
  for (int j = 1; j < k; ++j) total += static_cast<std::size_t>(j) * static_cast<std::size_t>(j);
  return total;
}

const FittedLearner& MultiResModel::learner(int k, int l) const {
  if (k < 1 || k > max_resolution_ || l < 1 || l > k * k)
    throw Error("MultiResModel: no learner at (" + std::to_string(k) + "," + std::to_string(l) + ")");
  return learners_[offset(k) + static_cast<std::size_t>(l - 1)];
}

MultiResModel fit_multiresolution(const Dataset& train, const LearnerSpec& spec, int max_resolution,
                                  Target target, int jobs) {
  if (max_resolution < 1) throw ConfigError("K", "max resolution must be >= 1");
  if (train.subjects.empty() || train.total_voxels() == 0)
    throw FitError("fit_multiresolution: empty training set");
  validate(spec);
  const int num_classes = num_classes_for(target, train.num_levels);
  const auto d = static_cast<Eigen::Index>(train.dim());

  struct Cell {
    int k;
    int l;
  };
  std::vector<Cell> cells;
  for (int k = 1; k <= max_resolution; ++k)
    for (int l = 1; l <= k * k; ++l) cells.push_back({k, l});

  // Voxel -> cell index per resolution, computed once.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> members(cells.size());
  std::vector<double> prevalence(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t s = 0; s < train.subjects.size(); ++s) {
    const SubjectImage& subject = train.subjects[s];
    for (std::size_t j = 0; j < subject.size(); ++j) {
      prevalence[static_cast<std::size_t>(class_label(subject, j, target))] += 1.0;
      for (int k = 1; k <= max_resolution; ++k) {
        const auto idx = MultiResModel::offset(k) +
                         static_cast<std::size_t>(region_index(subject.coords[j], k) - 1);
        members[idx].emplace_back(s, j);
      }
    }
  }

  std::vector<FittedLearner> learners(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t c) {
    const auto& rows = members[c];
    LearnerSpec cell_spec = spec;
    // The whole-gland cell keeps the caller's seed so K = 1 is the plain base learner.
    cell_spec.seed = c == 0 ? spec.seed : derive_seed(spec.seed, c);
    if (rows.empty()) {
      learners[c] = make_constant_learner(cell_spec, static_cast<int>(d), prevalence);
      return;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d);
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const SubjectImage& subject = train.subjects[rows[i].first];
      x.row(static_cast<Eigen::Index>(i)) = subject.features.row(static_cast<Eigen::Index>(rows[i].second));
      y[i] = class_label(subject, rows[i].second, target);
    }
    try {
      learners[c] = fit_learner(cell_spec, x, y, num_classes);
    } catch (const Error& e) {
      throw FitError("cell (k=" + std::to_string(cells[c].k) + ", l=" + std::to_string(cells[c].l) +
                     "): " + e.what());
    }
  });
  return MultiResModel(spec, max_resolution, target, num_classes, static_cast<int>(d),
                       std::move(learners));
}

ResolutionPredictions predict_multiresolution(const MultiResModel& model,
                                              const SubjectImage& subject) {
  if (subject.features.cols() != model.dim())
    throw DimensionError("predict_multiresolution: model expects " + std::to_string(model.dim()) +
                         " features, subject '" + subject.id + "' has " +
                         std::to_string(subject.features.cols()));
  const std::size_t n = subject.size();
  const int z = model.num_classes();
  ResolutionPredictions out;
  for (int k = 1; k <= model.max_resolution(); ++k) {
    Eigen::MatrixXd pred(static_cast<Eigen::Index>(n), z);
    // Group voxels by cell so each learner predicts one block.
    std::vector<std::vector<std::size_t>> by_cell(static_cast<std::size_t>(k * k));
    for (std::size_t j = 0; j < n; ++j)
      by_cell[static_cast<std::size_t>(region_index(subject.coords[j], k) - 1)].push_back(j);
    for (int l = 1; l <= k * k; ++l) {
      const auto& rows = by_cell[static_cast<std::size_t>(l - 1)];
      if (rows.empty()) continue;
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), model.dim());
      for (std::size_t i = 0; i < rows.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = subject.features.row(static_cast<Eigen::Index>(rows[i]));
      const Eigen::MatrixXd p = model.learner(k, l).predict_proba(x);
      for (std::size_t i = 0; i < rows.size(); ++i)
        pred.row(static_cast<Eigen::Index>(rows[i])) = p.row(static_cast<Eigen::Index>(i));
    }
    out.push_back(std::move(pred));
  }
  return out;
}

nlohmann::json multires_to_json(const MultiResModel& model) {
  nlohmann::json j;
  j["spec"] = spec_to_json(model.spec());
  j["max_resolution"] = model.max_resolution();
  j["target"] = to_string(model.target());
  j["num_classes"] = model.num_classes();
  j["dim"] = model.dim();
  auto& cells = j["cells"] = nlohmann::json::object();
  for (int k = 1; k <= model.max_resolution(); ++k)
    for (int l = 1; l <= k * k; ++l)
      cells[std::to_string(k) + "," + std::to_string(l)] = learner_to_json(model.learner(k, l));
  return j;
}

MultiResModel multires_from_json(const nlohmann::json& j) {
  try {
    const int kmax = j.at("max_resolution").get<int>();
    std::vector<FittedLearner> learners;
    for (int k = 1; k <= kmax; ++k)
      for (int l = 1; l <= k * k; ++l)
        learners.push_back(learner_from_json(j.at("cells").at(std::to_string(k) + "," + std::to_string(l))));
    return MultiResModel(spec_from_json(j.at("spec")), kmax,
                         target_from_string(j.at("target").get<std::string>()),
                         j.at("num_classes").get<int>(), j.at("dim").get<int>(), std::move(learners));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed multi-resolution model: ") + e.what());
  }
}

}  // namespace mrsl
