#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrsl/data.hpp"

namespace mrsl {

struct MaternParams {
  double variance = 1.0;   // sigma^2
  double range = 0.2;      // phi
  double smoothness = 0.5; // nu
};

void validate(const MaternParams& theta);

/// Matern covariance at Euclidean distance d, with u = 2 sqrt(nu) d / phi.
double matern_cov(double distance, const MaternParams& theta);
double matern_cov(Coord a, Coord b, const MaternParams& theta);

/// Jitter added to the covariance diagonal, tried in order until the
/// Cholesky factorization succeeds.
std::vector<double> default_jitter_schedule();

/// One draw of the zero-mean Gaussian field at `coords`.
std::vector<double> sample_gp(std::span<const Coord> coords, const MaternParams& theta,
                              std::uint64_t seed,
                              std::span<const double> jitters = {});

struct ShapeSpec {
  enum class Generator { Ellipse, File };
  Generator generator = Generator::Ellipse;
  int n_target = 1500;
  double tolerance = 0.10;       // accepted relative deviation of the voxel count
  double inner_fraction = 0.3;   // area share of the inner (PZ) ellipse
  double perturbation = 0.15;    // amplitude of the random boundary wobble
  std::filesystem::path file;    // Generator::File: CSV with shape,x,y,zone columns
};

struct Shape {
  std::vector<Coord> coords;  // standardized
  std::vector<int> zone;
};

/// Lattice points inside a randomly perturbed ellipse, standardized. Points
/// inside the concentric inner ellipse holding `inner_fraction` of the area
/// are zone 1, the rest zone 0.
Shape generate_shape(const ShapeSpec& spec, std::uint64_t seed);

/// Shapes from a CSV table (columns shape, x, y, zone), standardized per shape.
std::vector<Shape> load_shapes(const std::filesystem::path& path);

struct SimConfig {
  int subjects = 34;
  ShapeSpec shape;
  MaternParams matern{4.0, 0.2, 0.8};
  std::array<double, 2> q{-0.5, -0.5};  // baseline probit per zone r = 0, 1
  int num_levels = 2;                   // 2 simulates c; 3 simulates ordinal G
  /// mean[z][r] and cov[z][r]: class z (c, or G - 1), zone r.
  std::vector<std::array<Eigen::VectorXd, 2>> mean;
  std::vector<std::array<Eigen::MatrixXd, 2>> cov;
  Eigen::MatrixXd region_cov;           // Lambda
  std::vector<int> shift_resolutions{1, 2, 3};
  double subject_var = 0.0;             // tau^2
  double p1 = 0.5;
  double p2 = 0.7;
  std::uint64_t seed = 1;
  std::vector<std::string> feature_names;

  int dim() const noexcept { return mean.empty() ? 0 : static_cast<int>(mean.front()[0].size()); }
};

/// Throws ConfigError naming the offending field.
void validate(const SimConfig& config);

/// Region shifts e^k: shifts[k_index][l - 1] for each k in shift_resolutions.
std::vector<std::vector<Eigen::VectorXd>> draw_region_shifts(const SimConfig& config);

Dataset simulate_binary_dataset(const SimConfig& config, int jobs = 1);
/// Latent G* pooled over subjects is cut at its p1 and p2 empirical quantiles.
Dataset simulate_ordinal_dataset(const SimConfig& config, int jobs = 1);
/// Dispatches on config.num_levels.
Dataset simulate_dataset(const SimConfig& config, int jobs = 1);

/// Named presets: "<h>-hetero-<s>-spatial" with h, s in {moderate, strong};
/// prefix "ordinal-" for the three-level variant.
SimConfig sim_preset(std::string_view name);
std::vector<std::string> sim_preset_names();

nlohmann::json sim_config_to_json(const SimConfig& config);
/// Fields absent from `doc` keep the values of `base`.
SimConfig sim_config_from_json(const nlohmann::json& doc, SimConfig base = {});

}  // namespace mrsl
