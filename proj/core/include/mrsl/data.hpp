#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrsl {

/// Standardized 2-D voxel coordinate; both components lie in (-1, 1).
struct Coord {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

/// Zone indicator values.
inline constexpr int kCentralGland = 0;
inline constexpr int kPeripheralZone = 1;

struct GleasonScore {
  int primary = 0;
  int secondary = 0;
  friend bool operator==(const GleasonScore&, const GleasonScore&) = default;
};

/// Binary cancer indicator and ordinal clinical-significance category.
struct Labels {
  int cancer = 0;  // c in {0, 1}
  int grade = 1;   // G in {1, ..., Z}
  friend bool operator==(const Labels&, const Labels&) = default;
};

/// c = 1 iff the grades sum to at least 6. Benign voxels get G = 1, the 3+3
/// and 3+4 patterns G = 2, and every other cancer pair G = 3. Grades must be
/// in {0, 3, 4, 5}; 0 marks "no pattern" on benign tissue.
Labels derive_labels(int primary, int secondary);

/// One voxel, materialized from a SubjectImage row.
struct Voxel {
  Coord s;
  int zone = kCentralGland;
  std::vector<double> features;
  std::optional<GleasonScore> gleason;
  Labels labels;
};

/// Voxels of one image, stored column-wise. Row j of every member describes
/// voxel j.
struct SubjectImage {
  std::string id;
  std::vector<Coord> coords;
  std::vector<int> zone;
  Eigen::MatrixXd features;           // n x d
  std::vector<int> cancer;            // c
  std::vector<int> grade;             // G, 1-based
  std::vector<GleasonScore> gleason;  // empty when labels were supplied directly

  std::size_t size() const noexcept { return coords.size(); }
  Voxel voxel(std::size_t j) const;
  /// Throws Error when a Voxel/SubjectImage invariant is violated.
  void validate(int num_levels) const;

  friend bool operator==(const SubjectImage&, const SubjectImage&) = default;
};

struct Dataset {
  std::vector<SubjectImage> subjects;
  std::vector<std::string> feature_names;
  int num_levels = 3;  // Z

  std::size_t dim() const noexcept { return feature_names.size(); }
  std::size_t total_voxels() const noexcept;
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Subjects selected by index, in the given order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Per-axis bounding-box standardization: center at the box midpoint, scale by
/// 1.01 times the half-width so all outputs fall strictly inside (-1, 1).
/// An axis with zero width maps to 0.
std::vector<Coord> standardize_coordinates(std::span<const Coord> raw);

/// Column mapping for delimiter-separated voxel tables. Feature columns are
/// listed explicitly; when empty, every column not named elsewhere is a feature.
struct CsvSchema {
  std::string subject = "subject";
  std::string x = "x";
  std::string y = "y";
  std::string zone = "zone";
  std::vector<std::string> features;
  std::string gleason_primary = "gleason_primary";
  std::string gleason_secondary = "gleason_secondary";
  std::string cancer = "c";
  std::string grade = "G";
  char delimiter = ',';
  bool standardize = true;
  int num_levels = 3;
};

/// A first line "# coordinates=standardized num_levels=Z" (as written by
/// write_dataset_csv) disables standardization and sets Z.
Dataset read_dataset_csv(std::istream& in, const CsvSchema& schema = {});
void write_dataset_csv(std::ostream& out, const Dataset& data);

nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& doc);

/// Loads a dataset; `.json` files use the JSON document format, anything else
/// is parsed as a delimited table with `schema`.
Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
void save_dataset(const std::filesystem::path& path, const Dataset& data);

}  // namespace mrsl
