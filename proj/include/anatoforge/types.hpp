// Core volume types shared by every module: geometry, dense voxel grids,
// label volumes and binary masks. Grids are stored flat in x-fastest order.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace anatoforge {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedDatatype,
  TruncatedPayload,
  DimensionMismatch,
  IoFailure,
  GeometryMismatch,
  GeometryIncompatible,
  UnknownOrgan,
  EmptyMask,
  EmptyBaseMask,
  EmptyDonorMask,
  MissingVolume,
  UnboundedHole,
  NoCasesFound,
  SpecInfeasible,
  ConfigError,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Storage scalar of a volume payload on disk.
enum class ScalarType : std::uint8_t { UInt8, Int16, Int32, Float32 };

std::size_t byte_size(ScalarType t);
const char* to_string(ScalarType t);

struct VolumeGeometry {
  Eigen::Vector3i dims{0, 0, 0};          // voxels per axis
  Eigen::Vector3d spacing{1.0, 1.0, 1.0}; // mm per voxel
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity(); // voxel -> world, homogeneous

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }

  // x varies fastest, z slowest.
  std::int64_t index_of(int x, int y, int z) const {
    return x + static_cast<std::int64_t>(dims[0]) * (y + static_cast<std::int64_t>(dims[1]) * z);
  }

  bool contains(int x, int y, int z) const {
    return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
  }

  bool valid() const;
};

// dims equal and spacing equal within 1e-3 relative tolerance per axis.
// Affines are not compared; volumes of one dataset are assumed consistently oriented.
bool geometry_compatible(const VolumeGeometry& a, const VolumeGeometry& b);

template <typename Scalar>
struct VoxelGrid {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  VolumeGeometry geometry;
  Array voxels;

  Scalar& at(int x, int y, int z) { return voxels[geometry.index_of(x, y, z)]; }
  Scalar at(int x, int y, int z) const { return voxels[geometry.index_of(x, y, z)]; }

  bool extent_ok() const { return voxels.size() == geometry.voxel_count(); }
};

// CT intensities in HU. Values are held as float32; `dtype` records the
// on-disk representation so round trips stay bit-exact.
struct IntensityVolume : VoxelGrid<float> {
  ScalarType dtype{ScalarType::Float32};
};

// Non-negative integer organ labels; 0 is background. Every nonzero voxel
// value must appear in `label_table` (extra table entries are allowed).
struct LabelVolume : VoxelGrid<std::int32_t> {
  ScalarType dtype{ScalarType::UInt8};
  std::map<std::int32_t, std::string> label_table;
};

struct BinaryMask : VoxelGrid<bool> {};

BinaryMask make_mask(const VolumeGeometry& geometry);

// Table entry for every distinct nonzero value, named "organ_<id>".
std::map<std::int32_t, std::string> auto_label_table(const VoxelGrid<std::int32_t>& grid);

// Throws Error{InvalidArgument} on a nonzero voxel value missing from the table.
void validate_label_volume(const LabelVolume& labels);

}  // namespace anatoforge
