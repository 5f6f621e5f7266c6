// Synthetic multi-organ datasets with analytically known geometry: box and
// ellipsoid organs rasterized by the voxel-center rule, jittered per case,
// written as NIfTI pairs plus a manifest and a ground-truth metadata file.
#pragma once

#include "anatoforge/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace anatoforge {

enum class OrganShape { Ellipsoid, Box };

struct OrganSpec {
  std::int32_t id{1};
  std::string name;
  OrganShape shape{OrganShape::Ellipsoid};
  Eigen::Vector3d center;      // voxel coordinates
  Eigen::Vector3d semi_axes;   // voxels; for a box, the half-extent per axis
  double size_jitter{0.0};     // fractional scale range, uniform in [1-j, 1+j]
  int position_jitter{0};      // integer voxel offsets, uniform in [-p, p]
  double intensity_mean{0.0};  // HU
  double intensity_sigma{0.0}; // per-case organ intensity spread, HU
};

struct PhantomSpec {
  Eigen::Vector3i dims{32, 32, 32};
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  int n_cases{1};
  std::vector<OrganSpec> organs;
  double background_hu{-1000.0};
  double noise_sigma{0.0};  // per-voxel HU noise
  std::uint64_t seed{0};
};

PhantomSpec load_phantom_spec(const std::filesystem::path& path);

struct OrganTruth {
  std::int32_t organ{0};
  std::int64_t voxel_count{0};
  Eigen::Vector3d centroid{0, 0, 0};     // of the rasterized label voxels
  Eigen::Vector3d center{0, 0, 0};       // realized (jittered) parameters
  Eigen::Vector3d semi_axes{0, 0, 0};
  double intensity{0.0};
};

struct CaseTruth {
  std::string id;
  std::vector<OrganTruth> organs;
};

struct PhantomTruth {
  std::vector<CaseTruth> cases;
};

// Writes images/, labels/, manifest.json and metadata.json under out_dir.
// Byte-identical output for a fixed spec regardless of worker count.
PhantomTruth generate(const PhantomSpec& spec, const std::filesystem::path& out_dir,
                      int workers = 1);

}  // namespace anatoforge
