#include "mrsl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "mrsl/error.hpp"

namespace mrsl {

namespace {

constexpr int kDatasetSchemaVersion = 1;
constexpr double kInflation = 1.01;

bool valid_grade(int g) { return g == 0 || g == 3 || g == 4 || g == 5; }

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text, long row, const std::string& column) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                         "': not a number: '" + std::string(text) + "'",
                     row);
  if (!std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ", column '" + column + "': non-finite value",
                     row);
  return value;
}

int parse_int(std::string_view text, long row, const std::string& column) {
  const double v = parse_double(text, row, column);
  if (v != std::floor(v))
    throw ParseError("row " + std::to_string(row) + ", column '" + column + "': not an integer",
                     row);
  return static_cast<int>(v);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Labels derive_labels(int primary, int secondary) {
  if (!valid_grade(primary) || !valid_grade(secondary))
    throw Error("derive_labels: Gleason grades must be in {0,3,4,5}, got (" +
                std::to_string(primary) + "," + std::to_string(secondary) + ")");
  Labels out;
  out.cancer = primary + secondary >= 6 ? 1 : 0;
  if (out.cancer == 0) {
    out.grade = 1;
  } else if (primary == 3 && (secondary == 3 || secondary == 4)) {
    out.grade = 2;
  } else {
    out.grade = 3;
  }
  return out;
}

Voxel SubjectImage::voxel(std::size_t j) const {
  Voxel v;
  v.s = coords.at(j);
  v.zone = zone.at(j);
  v.features.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index f = 0; f < features.cols(); ++f)
    v.features[static_cast<std::size_t>(f)] = features(static_cast<Eigen::Index>(j), f);
  if (!gleason.empty()) v.gleason = gleason.at(j);
  v.labels = {cancer.at(j), grade.at(j)};
  return v;
}

void SubjectImage::validate(int num_levels) const {
  const std::size_t n = coords.size();
  const std::string who = "subject '" + id + "': ";
  if (n == 0) throw Error(who + "image has no voxels");
  if (zone.size() != n || cancer.size() != n || grade.size() != n ||
      static_cast<std::size_t>(features.rows()) != n || (!gleason.empty() && gleason.size() != n))
    throw Error(who + "column lengths disagree");
  for (std::size_t j = 0; j < n; ++j) {
    const Coord& s = coords[j];
    if (!(s.x > -1.0 && s.x < 1.0 && s.y > -1.0 && s.y < 1.0))
      throw Error(who + "coordinate of voxel " + std::to_string(j) + " outside (-1,1)^2");
    if (zone[j] != 0 && zone[j] != 1) throw Error(who + "zone must be 0 or 1");
    if (cancer[j] != 0 && cancer[j] != 1) throw Error(who + "cancer label must be 0 or 1");
    if (grade[j] < 1 || grade[j] > num_levels)
      throw Error(who + "grade outside 1.." + std::to_string(num_levels));
    if ((grade[j] >= 2) != (cancer[j] == 1))
      throw Error(who + "grade and cancer label disagree at voxel " + std::to_string(j));
    if (!gleason.empty()) {
      const Labels l = derive_labels(gleason[j].primary, gleason[j].secondary);
      if (l.cancer != cancer[j]) throw Error(who + "labels do not match Gleason scores");
    }
  }
  if (!features.allFinite()) throw Error(who + "non-finite feature value");
}

std::size_t Dataset::total_voxels() const noexcept {
  std::size_t total = 0;
  for (const auto& s : subjects) total += s.size();
  return total;
}

void Dataset::validate() const {
  if (num_levels < 2) throw Error("dataset: number of ordinal levels must be >= 2");
  for (const auto& s : subjects) {
    if (static_cast<std::size_t>(s.features.cols()) != dim())
      throw Error("subject '" + s.id + "': feature dimension differs from dataset");
    s.validate(num_levels);
  }
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.feature_names = data.feature_names;
  out.num_levels = data.num_levels;
  out.subjects.reserve(indices.size());
  for (std::size_t i : indices) out.subjects.push_back(data.subjects.at(i));
  return out;
}

std::vector<Coord> standardize_coordinates(std::span<const Coord> raw) {
  if (raw.empty()) throw Error("standardize_coordinates: no voxels");
  double xmin = raw[0].x, xmax = raw[0].x, ymin = raw[0].y, ymax = raw[0].y;
  for (const Coord& c : raw) {
    if (!std::isfinite(c.x) || !std::isfinite(c.y))
      throw Error("standardize_coordinates: non-finite coordinate");
    xmin = std::min(xmin, c.x);
    xmax = std::max(xmax, c.x);
    ymin = std::min(ymin, c.y);
    ymax = std::max(ymax, c.y);
  }
  const double cx = 0.5 * (xmin + xmax);
  const double cy = 0.5 * (ymin + ymax);
  const double sx = 0.5 * (xmax - xmin) * kInflation;
  const double sy = 0.5 * (ymax - ymin) * kInflation;
  std::vector<Coord> out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    out[j].x = sx > 0.0 ? (raw[j].x - cx) / sx : 0.0;
    out[j].y = sy > 0.0 ? (raw[j].y - cy) / sy : 0.0;
  }
  return out;
}

Dataset read_dataset_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input: no header row");
  // Optional "# key=value ..." line written by write_dataset_csv.
  bool standardize = schema.standardize;
  std::optional<int> declared_levels;
  if (!line.empty() && line[0] == '#') {
    std::istringstream meta(line.substr(1));
    std::string token;
    while (meta >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
      if (key == "coordinates" && value == "standardized") standardize = false;
      if (key == "num_levels") declared_levels = parse_int(value, 0, "num_levels");
    }
    if (!std::getline(in, line)) throw SchemaError("empty input: no header row");
  }
  std::vector<std::string> header = split_line(line, schema.delimiter);
  for (auto& h : header) h = std::string(trim(h));
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

  auto require = [&](const std::string& name) -> std::size_t {
    auto it = col.find(name);
    if (it == col.end()) throw SchemaError("missing column '" + name + "'");
    return it->second;
  };
  auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    return it->second;
  };

  const std::size_t c_subject = require(schema.subject);
  const std::size_t c_x = require(schema.x);
  const std::size_t c_y = require(schema.y);
  const std::size_t c_zone = require(schema.zone);
  const auto c_ga = optional_col(schema.gleason_primary);
  const auto c_gb = optional_col(schema.gleason_secondary);
  const auto c_c = optional_col(schema.cancer);
  const auto c_g = optional_col(schema.grade);
  const bool use_gleason = c_ga && c_gb;
  if ((c_ga.has_value()) != (c_gb.has_value()))
    throw SchemaError("Gleason columns must be given as a pair ('" + schema.gleason_primary +
                      "', '" + schema.gleason_secondary + "')");
  if (!use_gleason && !c_c)
    throw SchemaError("missing label columns: need '" + schema.gleason_primary + "'/'" +
                      schema.gleason_secondary + "' or '" + schema.cancer + "'");

  std::vector<std::string> feature_names = schema.features;
  if (feature_names.empty()) {
    for (const auto& h : header) {
      if (h == schema.subject || h == schema.x || h == schema.y || h == schema.zone ||
          h == schema.gleason_primary || h == schema.gleason_secondary || h == schema.cancer ||
          h == schema.grade)
        continue;
      feature_names.push_back(h);
    }
  }
  if (feature_names.empty()) throw SchemaError("no feature columns");
  std::vector<std::size_t> c_feat;
  for (const auto& f : feature_names) c_feat.push_back(require(f));

  struct Rows {
    std::vector<Coord> raw;
    std::vector<int> zone, cancer, grade;
    std::vector<GleasonScore> gleason;
    std::vector<double> features;
  };
  std::vector<std::string> order;
  std::map<std::string, Rows> by_subject;

  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       row);
    const std::string id(trim(fields[c_subject]));
    auto [it, inserted] = by_subject.try_emplace(id);
    if (inserted) order.push_back(id);
    Rows& r = it->second;
    r.raw.push_back({parse_double(fields[c_x], row, schema.x),
                     parse_double(fields[c_y], row, schema.y)});
    r.zone.push_back(parse_int(fields[c_zone], row, schema.zone));
    for (std::size_t f = 0; f < c_feat.size(); ++f)
      r.features.push_back(parse_double(fields[c_feat[f]], row, feature_names[f]));
    Labels labels;
    if (use_gleason) {
      GleasonScore g{parse_int(fields[*c_ga], row, schema.gleason_primary),
                     parse_int(fields[*c_gb], row, schema.gleason_secondary)};
      try {
        labels = derive_labels(g.primary, g.secondary);
      } catch (const Error& e) {
        throw ParseError("row " + std::to_string(row) + ": " + e.what(), row);
      }
      r.gleason.push_back(g);
    } else {
      labels.cancer = parse_int(fields[*c_c], row, schema.cancer);
      labels.grade = c_g ? parse_int(fields[*c_g], row, schema.grade) : labels.cancer + 1;
    }
    r.cancer.push_back(labels.cancer);
    r.grade.push_back(labels.grade);
  }

  Dataset data;
  data.feature_names = feature_names;
  data.num_levels = schema.num_levels;
  if (!use_gleason && !c_g) data.num_levels = 2;
  if (declared_levels) data.num_levels = *declared_levels;
  const auto d = static_cast<Eigen::Index>(feature_names.size());
  for (const auto& id : order) {
    Rows& r = by_subject.at(id);
    SubjectImage s;
    s.id = id;
    s.coords = standardize ? standardize_coordinates(r.raw) : r.raw;
    s.zone = std::move(r.zone);
    s.cancer = std::move(r.cancer);
    s.grade = std::move(r.grade);
    s.gleason = std::move(r.gleason);
    const auto n = static_cast<Eigen::Index>(s.coords.size());
    s.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(r.features.data(), n, d);
    data.subjects.push_back(std::move(s));
  }
  if (data.subjects.empty()) throw SchemaError("no data rows");
  data.validate();
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const bool with_gleason =
      !data.subjects.empty() &&
      std::all_of(data.subjects.begin(), data.subjects.end(),
                  [](const SubjectImage& s) { return !s.gleason.empty(); });
  out << "# coordinates=standardized num_levels=" << data.num_levels << '\n';
  out << "subject,x,y,zone";
  for (const auto& f : data.feature_names) out << ',' << quote_if_needed(f, ',');
  if (with_gleason) out << ",gleason_primary,gleason_secondary";
  out << ",c,G\n";
  for (const auto& s : data.subjects) {
    const std::string id = quote_if_needed(s.id, ',');
    for (std::size_t j = 0; j < s.size(); ++j) {
      out << id << ',' << format_double(s.coords[j].x) << ',' << format_double(s.coords[j].y)
          << ',' << s.zone[j];
      for (Eigen::Index f = 0; f < s.features.cols(); ++f)
        out << ',' << format_double(s.features(static_cast<Eigen::Index>(j), f));
      if (with_gleason) out << ',' << s.gleason[j].primary << ',' << s.gleason[j].secondary;
      out << ',' << s.cancer[j] << ',' << s.grade[j] << '\n';
    }
  }
}

nlohmann::json dataset_to_json(const Dataset& data) {
  nlohmann::json doc;
  doc["schema_version"] = kDatasetSchemaVersion;
  doc["feature_names"] = data.feature_names;
  doc["num_levels"] = data.num_levels;
  auto& subjects = doc["subjects"] = nlohmann::json::array();
  for (const auto& s : data.subjects) {
    nlohmann::json js;
    js["id"] = s.id;
    auto& voxels = js["voxels"] = nlohmann::json::array();
    for (std::size_t j = 0; j < s.size(); ++j) {
      nlohmann::json v;
      v["s"] = {s.coords[j].x, s.coords[j].y};
      v["r"] = s.zone[j];
      std::vector<double> y(static_cast<std::size_t>(s.features.cols()));
      for (Eigen::Index f = 0; f < s.features.cols(); ++f)
        y[static_cast<std::size_t>(f)] = s.features(static_cast<Eigen::Index>(j), f);
      v["y"] = std::move(y);
      if (!s.gleason.empty()) v["gleason"] = {s.gleason[j].primary, s.gleason[j].secondary};
      v["c"] = s.cancer[j];
      v["G"] = s.grade[j];
      voxels.push_back(std::move(v));
    }
    subjects.push_back(std::move(js));
  }
  return doc;
}

Dataset dataset_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kDatasetSchemaVersion)
      throw SchemaError("unsupported dataset schema version");
    Dataset data;
    data.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    data.num_levels = doc.at("num_levels").get<int>();
    const auto d = static_cast<Eigen::Index>(data.feature_names.size());
    for (const auto& js : doc.at("subjects")) {
      SubjectImage s;
      s.id = js.at("id").get<std::string>();
      const auto& voxels = js.at("voxels");
      s.features.resize(static_cast<Eigen::Index>(voxels.size()), d);
      Eigen::Index j = 0;
      for (const auto& v : voxels) {
        const auto& sv = v.at("s");
        s.coords.push_back({sv.at(0).get<double>(), sv.at(1).get<double>()});
        s.zone.push_back(v.at("r").get<int>());
        const auto& y = v.at("y");
        if (static_cast<Eigen::Index>(y.size()) != d)
          throw DimensionError("subject '" + s.id + "': feature vector length mismatch");
        for (Eigen::Index f = 0; f < d; ++f) s.features(j, f) = y.at(static_cast<std::size_t>(f)).get<double>();
        if (v.contains("gleason"))
          s.gleason.push_back({v["gleason"].at(0).get<int>(), v["gleason"].at(1).get<int>()});
        s.cancer.push_back(v.at("c").get<int>());
        s.grade.push_back(v.at("G").get<int>());
        ++j;
      }
      data.subjects.push_back(std::move(s));
    }
    data.validate();
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed dataset document: ") + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path.string() + "'");
  if (path.extension() == ".json") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("'" + path.string() + "': " + e.what());
    }
    return dataset_from_json(doc);
  }
  return read_dataset_csv(in, schema);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file '" + path.string() + "'");
  if (path.extension() == ".json") {
    out << dataset_to_json(data).dump() << '\n';
  } else {
    write_dataset_csv(out, data);
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace mrsl
