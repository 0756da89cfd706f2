#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fixture {

mrsl::SimConfig small_config(const std::string& preset, std::uint64_t seed, int subjects, int voxels) {
  mrsl::SimConfig c = mrsl::sim_preset(preset);
  c.seed = seed;
  c.subjects = subjects;
  c.shape.n_target = voxels;
  c.shape.tolerance = 0.2;
  return c;
}

mrsl::Dataset small_binary(std::uint64_t seed, int subjects, int voxels) {
  return mrsl::simulate_dataset(small_config("strong-hetero-strong-spatial", seed, subjects, voxels));
}

mrsl::Dataset small_ordinal(std::uint64_t seed, int subjects, int voxels) {
  return mrsl::simulate_dataset(small_config("ordinal-strong-hetero-strong-spatial", seed, subjects, voxels));
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("mrsl-test-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fixture
