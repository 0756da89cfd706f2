#include "mrsl/simgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "mrsl/error.hpp"
#include "mrsl/multires.hpp"
#include "mrsl/parallel.hpp"
#include "mrsl/random.hpp"

namespace mrsl {

namespace {

// Stream indices for derive_seed; each consumer gets its own sequence.
constexpr std::uint64_t kShiftStream = 1;
constexpr std::uint64_t kShapeStream = 2;
constexpr std::uint64_t kFieldStream = 3;
constexpr std::uint64_t kLatentStream = 4;
constexpr std::uint64_t kFeatureStream = 5;
constexpr std::uint64_t kShapePickStream = 6;

// Distances are memoized on a 2^-40 grid; the covariance is evaluated at the
// grid value so results do not depend on visiting order.
constexpr double kDistanceQuantum = 1.0 / 1099511627776.0;

// Square-root factor of a symmetric PSD matrix (lower Cholesky when PD).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m, const std::string& field) {
  if (m.rows() != m.cols()) throw ConfigError(field, "must be square");
  if (m.size() == 0) return m;
  if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError(field, "must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
    throw ConfigError(field, "must be positive semi-definite");
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd draw_mvn(const Eigen::MatrixXd& factor, CounterRng& rng) {
  Eigen::VectorXd z(factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return factor * z;
}

struct Ellipse {
  double a = 1.0, b = 0.8;
  double amp2 = 0.0, phase2 = 0.0, amp3 = 0.0, phase3 = 0.0;

  // Normalized radius: < 1 inside, 1 on the boundary.
  double rho(double x, double y) const {
    const double u = x / a, v = y / b;
    const double t = std::atan2(v, u);
    const double r = 1.0 + amp2 * std::cos(2.0 * t + phase2) + amp3 * std::cos(3.0 * t + phase3);
    return std::sqrt(u * u + v * v) / r;
  }
  double reach() const { return std::max(a, b) * (1.0 + amp2 + amp3); }
  double area() const {
    return a * b * std::numbers::pi * (1.0 + 0.5 * (amp2 * amp2 + amp3 * amp3));
  }
};

std::size_t lattice_count(const Ellipse& e, double pitch) {
  const auto m = static_cast<long>(std::ceil(e.reach() / pitch));
  std::size_t count = 0;
  for (long i = -m; i <= m; ++i)
    for (long j = -m; j <= m; ++j)
      if (e.rho(static_cast<double>(i) * pitch, static_cast<double>(j) * pitch) <= 1.0) ++count;
  return count;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Eigen::VectorXd vec_from(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// A number means that multiple of the identity.
Eigen::MatrixXd mat_from(const nlohmann::json& j, int dim, const std::string& field) {
  if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
  if (!j.is_array()) throw ConfigError(field, "expected a number or a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vec_from(j[static_cast<std::size_t>(r)], field);
    if (row.size() != rows) throw ConfigError(field, "matrix must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

std::vector<std::string> default_feature_names(int d) {
  std::vector<std::string> names;
  for (int i = 1; i <= d; ++i) names.push_back("f" + std::to_string(i));
  return names;
}

}  // namespace

void validate(const MaternParams& t) {
  if (!(t.variance > 0.0) || !std::isfinite(t.variance)) throw ConfigError("matern.variance", "must be > 0");
  if (!(t.range > 0.0) || !std::isfinite(t.range)) throw ConfigError("matern.range", "must be > 0");
  if (!(t.smoothness > 0.0) || !std::isfinite(t.smoothness))
    throw ConfigError("matern.smoothness", "must be > 0");
}

double matern_cov(double distance, const MaternParams& t) {
  if (!std::isfinite(distance) || distance < 0.0) throw Error("matern_cov: distance must be finite and >= 0");
  validate(t);
  const double nu = t.smoothness;
  const double u = 2.0 * std::sqrt(nu) * distance / t.range;
  if (u == 0.0) return t.variance;
  if (u > 700.0) return 0.0;
  const double log_scale = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(u);
  return t.variance * std::exp(log_scale) * std::cyl_bessel_k(nu, u);
}

double matern_cov(Coord a, Coord b, const MaternParams& t) {
  if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) || !std::isfinite(b.y))
    throw Error("matern_cov: non-finite coordinate");
  return matern_cov(std::hypot(a.x - b.x, a.y - b.y), t);
}

std::vector<double> default_jitter_schedule() { return {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}; }

std::vector<double> sample_gp(std::span<const Coord> coords, const MaternParams& theta,
                              std::uint64_t seed, std::span<const double> jitters) {
  validate(theta);
  const auto n = static_cast<Eigen::Index>(coords.size());
  if (n == 0) throw Error("sample_gp: no points");
  const std::vector<double> fallback = default_jitter_schedule();
  if (jitters.empty()) jitters = fallback;

  Eigen::MatrixXd c(n, n);
  std::unordered_map<std::int64_t, double> memo;
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = theta.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const Coord& a = coords[static_cast<std::size_t>(i)];
      const Coord& b = coords[static_cast<std::size_t>(j)];
      const auto key = static_cast<std::int64_t>(std::llround(std::hypot(a.x - b.x, a.y - b.y) / kDistanceQuantum));
      auto it = memo.find(key);
      if (it == memo.end())
        it = memo.emplace(key, matern_cov(static_cast<double>(key) * kDistanceQuantum, theta)).first;
      c(i, j) = it->second;
    }
  }

  for (double eps : jitters) {
    Eigen::MatrixXd m = c;
    m.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt;
    llt.compute(m);  // reads the lower triangle only
    if (llt.info() != Eigen::Success) continue;
    CounterRng rng(seed);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    const Eigen::VectorXd w = llt.matrixL() * z;
    return {w.data(), w.data() + w.size()};
  }
  throw FitError("sample_gp: covariance not positive definite after jitter " +
                 std::to_string(jitters.back()));
}

Shape generate_shape(const ShapeSpec& spec, std::uint64_t seed) {
  if (spec.n_target < 1) throw ConfigError("shape.n_target", "must be >= 1");
  if (!(spec.inner_fraction >= 0.0 && spec.inner_fraction <= 1.0))
    throw ConfigError("shape.inner_fraction", "must lie in [0, 1]");
  if (!(spec.perturbation >= 0.0 && spec.perturbation <= 0.4))
    throw ConfigError("shape.perturbation", "must lie in [0, 0.4]");
  if (!(spec.tolerance >= 0.0)) throw ConfigError("shape.tolerance", "must be >= 0");

  CounterRng rng(seed);
  Ellipse e;
  e.a = 1.0;
  e.b = 0.65 + 0.25 * rng.uniform();
  e.amp2 = spec.perturbation * rng.uniform();
  e.phase2 = 2.0 * std::numbers::pi * rng.uniform();
  e.amp3 = 0.5 * spec.perturbation * rng.uniform();
  e.phase3 = 2.0 * std::numbers::pi * rng.uniform();

  const double target = spec.n_target;
  auto ok = [&](std::size_t count) {
    return std::abs(static_cast<double>(count) - target) <= spec.tolerance * target;
  };
  // Bisection on log pitch; the count falls as the pitch grows.
  double lo = std::log(std::sqrt(e.area() / target) / 4.0);
  double hi = std::log(std::sqrt(e.area() / target) * 4.0 + e.reach());
  double pitch = std::exp(0.5 * (lo + hi));
  std::size_t count = lattice_count(e, pitch);
  for (int it = 0; it < 200 && !ok(count); ++it) {
    if (static_cast<double>(count) > target) lo = std::log(pitch);
    else hi = std::log(pitch);
    pitch = std::exp(0.5 * (lo + hi));
    count = lattice_count(e, pitch);
  }
  if (!ok(count))
    throw ConfigError("shape.n_target", "no lattice pitch gives " + std::to_string(spec.n_target) +
                                            " voxels within tolerance");

  std::vector<Coord> raw;
  std::vector<double> rho;
  const auto m = static_cast<long>(std::ceil(e.reach() / pitch));
  for (long i = -m; i <= m; ++i)
    for (long j = -m; j <= m; ++j) {
      const double r = e.rho(static_cast<double>(i) * pitch, static_cast<double>(j) * pitch);
      if (r <= 1.0) {
        raw.push_back({static_cast<double>(i), static_cast<double>(j)});
        rho.push_back(r);
      }
    }
  Shape shape;
  shape.coords = standardize_coordinates(raw);
  shape.zone.resize(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j)
    shape.zone[j] = spec.inner_fraction >= 1.0 || rho[j] * rho[j] < spec.inner_fraction ? kPeripheralZone
                                                                                        : kCentralGland;
  return shape;
}

std::vector<Shape> load_shapes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open shape file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("shape file is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("shape file lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cs = column("shape"), cx = column("x"), cy = column("y"), cz = column("zone");
  std::map<std::string, std::pair<std::vector<Coord>, std::vector<int>>> groups;
  std::vector<std::string> order;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) throw ParseError("shape file: short row", row);
    double x = 0, y = 0;
    int z = 0;
    try {
      x = std::stod(cells[cx]);
      y = std::stod(cells[cy]);
      z = std::stoi(cells[cz]);
    } catch (const std::exception&) {
      throw ParseError("shape file: non-numeric value", row);
    }
    if (z != 0 && z != 1) throw ParseError("shape file: zone must be 0 or 1", row);
    auto [it, inserted] = groups.try_emplace(cells[cs]);
    if (inserted) order.push_back(cells[cs]);
    it->second.first.push_back({x, y});
    it->second.second.push_back(z);
  }
  if (order.empty()) throw SchemaError("shape file has no rows");
  std::vector<Shape> shapes;
  for (const auto& id : order) {
    auto& g = groups[id];
    shapes.push_back({standardize_coordinates(g.first), std::move(g.second)});
  }
  return shapes;
}

void validate(const SimConfig& c) {
  if (c.subjects < 1) throw ConfigError("subjects", "must be >= 1");
  validate(c.matern);
  if (c.num_levels != 2 && c.num_levels != 3) throw ConfigError("num_levels", "must be 2 or 3");
  if (static_cast<int>(c.mean.size()) != c.num_levels)
    throw ConfigError("mean", "needs one entry per class (" + std::to_string(c.num_levels) + ")");
  if (c.cov.size() != c.mean.size()) throw ConfigError("cov", "needs one entry per class");
  const int d = c.dim();
  if (d < 1) throw ConfigError("mean", "feature dimension must be >= 1");
  for (std::size_t z = 0; z < c.mean.size(); ++z)
    for (int r = 0; r < 2; ++r) {
      if (c.mean[z][static_cast<std::size_t>(r)].size() != d)
        throw ConfigError("mean", "all mean vectors must have length " + std::to_string(d));
      if (!c.mean[z][static_cast<std::size_t>(r)].allFinite()) throw ConfigError("mean", "non-finite value");
      const auto& g = c.cov[z][static_cast<std::size_t>(r)];
      if (g.rows() != d || g.cols() != d) throw ConfigError("cov", "matrices must be d x d");
      psd_factor(g, "cov");
    }
  if (c.region_cov.rows() != d || c.region_cov.cols() != d)
    throw ConfigError("region_cov", "must be d x d");
  psd_factor(c.region_cov, "region_cov");
  for (int k : c.shift_resolutions)
    if (k < 1) throw ConfigError("shift_resolutions", "entries must be >= 1");
  if (!(c.subject_var >= 0.0) || !std::isfinite(c.subject_var))
    throw ConfigError("subject_var", "must be >= 0");
  if (!(c.p1 > 0.0 && c.p1 < c.p2 && c.p2 < 1.0)) throw ConfigError("p1", "need 0 < p1 < p2 < 1");
  for (double q : c.q)
    if (!std::isfinite(q)) throw ConfigError("q", "must be finite");
  if (!c.feature_names.empty() && static_cast<int>(c.feature_names.size()) != d)
    throw ConfigError("feature_names", "needs one name per feature");
}

std::vector<std::vector<Eigen::VectorXd>> draw_region_shifts(const SimConfig& c) {
  const Eigen::MatrixXd factor = psd_factor(c.region_cov, "region_cov");
  CounterRng rng(derive_seed(c.seed, kShiftStream));
  std::vector<std::vector<Eigen::VectorXd>> shifts;
  for (int k : c.shift_resolutions) {
    std::vector<Eigen::VectorXd> cells;
    for (int l = 1; l <= k * k; ++l) cells.push_back(draw_mvn(factor, rng));
    shifts.push_back(std::move(cells));
  }
  return shifts;
}

namespace {

struct Latent {
  Shape shape;
  std::vector<double> value;  // c* or G*
};

Dataset simulate(const SimConfig& c, int jobs) {
  validate(c);
  const int d = c.dim();
  const auto n_subj = static_cast<std::size_t>(c.subjects);
  const auto shifts = draw_region_shifts(c);

  std::vector<Shape> library;
  if (c.shape.generator == ShapeSpec::Generator::File) library = load_shapes(c.shape.file);

  // Shapes, fields and latent values per subject.
  std::vector<Latent> latent(n_subj);
  parallel_for(n_subj, jobs, [&](std::size_t i) {
    Latent& lt = latent[i];
    if (library.empty()) {
      lt.shape = generate_shape(c.shape, derive_seed(derive_seed(c.seed, kShapeStream), i));
    } else {
      CounterRng pick(derive_seed(derive_seed(c.seed, kShapePickStream), i));
      lt.shape = library[pick.index(library.size())];
    }
    const std::vector<double> w =
        sample_gp(lt.shape.coords, c.matern, derive_seed(derive_seed(c.seed, kFieldStream), i));
    CounterRng rng(derive_seed(derive_seed(c.seed, kLatentStream), i));
    lt.value.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j)
      lt.value[j] = c.q[static_cast<std::size_t>(lt.shape.zone[j])] + w[j] + rng.normal();
  });

  // Class per voxel: sign of c*, or rank cuts of pooled G*.
  std::vector<std::vector<int>> cls(n_subj);
  if (c.num_levels == 2) {
    for (std::size_t i = 0; i < n_subj; ++i)
      for (double v : latent[i].value) cls[i].push_back(v > 0.0 ? 1 : 0);
  } else {
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> pool;
    for (std::size_t i = 0; i < n_subj; ++i) {
      cls[i].assign(latent[i].value.size(), 0);
      for (std::size_t j = 0; j < latent[i].value.size(); ++j) pool.push_back({latent[i].value[j], {i, j}});
    }
    std::sort(pool.begin(), pool.end());
    const auto total = static_cast<double>(pool.size());
    const auto m1 = static_cast<std::size_t>(std::llround(c.p1 * total));
    const auto m2 = static_cast<std::size_t>(std::llround(c.p2 * total));
    for (std::size_t r = 0; r < pool.size(); ++r)
      cls[pool[r].second.first][pool[r].second.second] = r < m1 ? 0 : (r < m2 ? 1 : 2);
  }

  std::vector<std::array<Eigen::MatrixXd, 2>> factors(c.cov.size());
  for (std::size_t z = 0; z < c.cov.size(); ++z)
    for (std::size_t r = 0; r < 2; ++r) factors[z][r] = psd_factor(c.cov[z][r], "cov");
  const double tau = std::sqrt(c.subject_var);

  Dataset data;
  data.num_levels = c.num_levels;
  data.feature_names = c.feature_names.empty() ? default_feature_names(d) : c.feature_names;
  data.subjects.resize(n_subj);
  const int width = std::max(3, static_cast<int>(std::to_string(n_subj).size()));
  parallel_for(n_subj, jobs, [&](std::size_t i) {
    const Shape& shape = latent[i].shape;
    const auto n = shape.coords.size();
    CounterRng rng(derive_seed(derive_seed(c.seed, kFeatureStream), i));
    Eigen::VectorXd delta(d);
    for (int f = 0; f < d; ++f) delta[f] = tau * rng.normal();
    SubjectImage& s = data.subjects[i];
    std::string id = std::to_string(i + 1);
    s.id = "S" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;
    s.coords = shape.coords;
    s.zone = shape.zone;
    s.features.resize(static_cast<Eigen::Index>(n), d);
    s.cancer.resize(n);
    s.grade.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const int z = cls[i][j];
      const auto r = static_cast<std::size_t>(shape.zone[j]);
      s.grade[j] = z + 1;
      s.cancer[j] = z > 0 ? 1 : 0;
      Eigen::VectorXd mu = c.mean[static_cast<std::size_t>(z)][r] + delta;
      for (std::size_t k = 0; k < shifts.size(); ++k)
        mu += shifts[k][static_cast<std::size_t>(region_index(shape.coords[j], c.shift_resolutions[k]) - 1)];
      s.features.row(static_cast<Eigen::Index>(j)) =
          (mu + draw_mvn(factors[static_cast<std::size_t>(z)][r], rng)).transpose();
    }
  });
  return data;
}

}  // namespace

Dataset simulate_binary_dataset(const SimConfig& config, int jobs) {
  if (config.num_levels != 2) throw ConfigError("num_levels", "binary simulation needs num_levels = 2");
  return simulate(config, jobs);
}

Dataset simulate_ordinal_dataset(const SimConfig& config, int jobs) {
  if (config.num_levels != 3) throw ConfigError("num_levels", "ordinal simulation needs num_levels = 3");
  return simulate(config, jobs);
}

Dataset simulate_dataset(const SimConfig& config, int jobs) { return simulate(config, jobs); }

std::vector<std::string> sim_preset_names() {
  std::vector<std::string> names;
  for (const char* prefix : {"", "ordinal-"})
    for (const char* h : {"moderate", "strong"})
      for (const char* s : {"moderate", "strong"})
        names.push_back(std::string(prefix) + h + "-hetero-" + s + "-spatial");
  return names;
}

SimConfig sim_preset(std::string_view name) {
  std::string rest(name);
  bool ordinal = false;
  if (rest.rfind("ordinal-", 0) == 0) {
    ordinal = true;
    rest = rest.substr(8);
  }
  bool strong_hetero = false, strong_spatial = false;
  if (rest == "moderate-hetero-moderate-spatial") {
  } else if (rest == "moderate-hetero-strong-spatial") {
    strong_spatial = true;
  } else if (rest == "strong-hetero-moderate-spatial") {
    strong_hetero = true;
  } else if (rest == "strong-hetero-strong-spatial") {
    strong_hetero = strong_spatial = true;
  } else {
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
  }

  // Spatial settings: variance 4, range 0.2, smoothness 0.8 (moderate) or
  // 10, 0.5, 1.5 (strong).
  SimConfig c;
  const int d = 4;
  c.matern = strong_spatial ? MaternParams{10.0, 0.5, 1.5} : MaternParams{4.0, 0.2, 0.8};
  c.q = {-1.0, -0.5};
  c.shape.n_target = 1500;
  c.shape.inner_fraction = 0.3;
  c.subject_var = 0.1;
  c.region_cov = (strong_hetero ? 0.25 : 0.04) * Eigen::MatrixXd::Identity(d, d);
  c.shift_resolutions = {1, 2, 3};
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
  const Eigen::VectorXd zone_offset = 0.2 * ones;
  if (!ordinal) {
    c.num_levels = 2;
    c.subjects = 34;
    c.mean = {{Eigen::VectorXd::Zero(d), zone_offset}, {0.5 * ones, 0.5 * ones + zone_offset}};
  } else {
    c.num_levels = 3;
    c.subjects = 40;
    c.q = {0.0, 0.0};
    c.mean = {{Eigen::VectorXd::Zero(d), zone_offset},
              {0.4 * ones, 0.4 * ones + zone_offset},
              {0.8 * ones, 0.8 * ones + zone_offset}};
  }
  c.cov.assign(c.mean.size(), {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)});
  c.feature_names = default_feature_names(d);
  return c;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json j;
  j["subjects"] = c.subjects;
  j["seed"] = c.seed;
  j["num_levels"] = c.num_levels;
  j["shape"] = {{"generator", c.shape.generator == ShapeSpec::Generator::Ellipse ? "ellipse" : "file"},
                {"n_target", c.shape.n_target},
                {"tolerance", c.shape.tolerance},
                {"inner_fraction", c.shape.inner_fraction},
                {"perturbation", c.shape.perturbation},
                {"file", c.shape.file.string()}};
  j["matern"] = {{"variance", c.matern.variance}, {"range", c.matern.range}, {"smoothness", c.matern.smoothness}};
  j["q"] = c.q;
  nlohmann::json mean = nlohmann::json::array(), cov = nlohmann::json::array();
  for (std::size_t z = 0; z < c.mean.size(); ++z) {
    mean.push_back({vec_json(c.mean[z][0]), vec_json(c.mean[z][1])});
    cov.push_back({mat_json(c.cov[z][0]), mat_json(c.cov[z][1])});
  }
  j["mean"] = mean;
  j["cov"] = cov;
  j["region_cov"] = mat_json(c.region_cov);
  j["shift_resolutions"] = c.shift_resolutions;
  j["subject_var"] = c.subject_var;
  j["p1"] = c.p1;
  j["p2"] = c.p2;
  j["feature_names"] = c.feature_names;
  return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig c) {
  if (!j.is_object()) throw ConfigError("simulation", "expected an object");
  auto get = [&](const nlohmann::json& obj, const char* key, auto& dst, const std::string& field) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field, "has the wrong type");
    }
  };
  if (j.contains("preset")) {
    const std::uint64_t seed = c.seed;
    c = sim_preset(j["preset"].get<std::string>());
    c.seed = seed;
  }
  get(j, "subjects", c.subjects, "subjects");
  get(j, "seed", c.seed, "seed");
  get(j, "num_levels", c.num_levels, "num_levels");
  if (j.contains("shape")) {
    const auto& s = j["shape"];
    if (s.contains("generator")) {
      const auto g = s["generator"].get<std::string>();
      if (g == "ellipse") c.shape.generator = ShapeSpec::Generator::Ellipse;
      else if (g == "file") c.shape.generator = ShapeSpec::Generator::File;
      else throw ConfigError("shape.generator", "must be 'ellipse' or 'file'");
    }
    get(s, "n_target", c.shape.n_target, "shape.n_target");
    get(s, "tolerance", c.shape.tolerance, "shape.tolerance");
    get(s, "inner_fraction", c.shape.inner_fraction, "shape.inner_fraction");
    get(s, "perturbation", c.shape.perturbation, "shape.perturbation");
    std::string file;
    get(s, "file", file, "shape.file");
    if (!file.empty()) c.shape.file = file;
  }
  if (j.contains("matern")) {
    const auto& m = j["matern"];
    get(m, "variance", c.matern.variance, "matern.variance");
    get(m, "range", c.matern.range, "matern.range");
    get(m, "smoothness", c.matern.smoothness, "matern.smoothness");
  }
  get(j, "q", c.q, "q");
  get(j, "shift_resolutions", c.shift_resolutions, "shift_resolutions");
  get(j, "subject_var", c.subject_var, "subject_var");
  get(j, "p1", c.p1, "p1");
  get(j, "p2", c.p2, "p2");
  get(j, "feature_names", c.feature_names, "feature_names");
  if (j.contains("mean")) {
    c.mean.clear();
    for (const auto& per_class : j["mean"]) {
      if (!per_class.is_array() || per_class.size() != 2)
        throw ConfigError("mean", "each class needs a [zone 0, zone 1] pair");
      c.mean.push_back({vec_from(per_class[0], "mean"), vec_from(per_class[1], "mean")});
    }
  }
  const int d = c.dim();
  if (j.contains("cov")) {
    const auto& cv = j["cov"];
    c.cov.clear();
    if (cv.is_number()) {
      c.cov.assign(c.mean.size(), {mat_from(cv, d, "cov"), mat_from(cv, d, "cov")});
    } else {
      for (const auto& per_class : cv) {
        if (!per_class.is_array() || per_class.size() != 2)
          throw ConfigError("cov", "each class needs a [zone 0, zone 1] pair");
        c.cov.push_back({mat_from(per_class[0], d, "cov"), mat_from(per_class[1], d, "cov")});
      }
    }
  } else if (c.cov.size() != c.mean.size()) {
    c.cov.assign(c.mean.size(), {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)});
  }
  if (j.contains("region_cov")) c.region_cov = mat_from(j["region_cov"], d, "region_cov");
  else if (c.region_cov.rows() != d) c.region_cov = Eigen::MatrixXd::Zero(d, d);
  if (c.feature_names.size() != static_cast<std::size_t>(d) && !j.contains("feature_names"))
    c.feature_names = default_feature_names(d);
  validate(c);
  return c;
}

}  // namespace mrsl
