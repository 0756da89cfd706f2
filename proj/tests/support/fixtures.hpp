#pragma once

// Small simulated datasets and scratch directories shared by the tests.

#include <cstdint>
#include <filesystem>
#include <string>

#include "mrsl/data.hpp"
#include "mrsl/simgen.hpp"

namespace fixture {

/// A preset shrunk to `subjects` images of about `voxels` voxels each.
mrsl::SimConfig small_config(const std::string& preset, std::uint64_t seed, int subjects = 8,
                             int voxels = 200);
mrsl::Dataset small_binary(std::uint64_t seed, int subjects = 8, int voxels = 200);
mrsl::Dataset small_ordinal(std::uint64_t seed, int subjects = 8, int voxels = 200);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixture
