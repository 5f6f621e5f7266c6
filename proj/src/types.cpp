#include "anatoforge/types.hpp"

#include <cmath>

namespace anatoforge {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::UnsupportedDatatype: return "unsupported-datatype";
    case ErrorCode::TruncatedPayload: return "truncated-payload";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::GeometryMismatch: return "geometry-mismatch";
    case ErrorCode::GeometryIncompatible: return "geometry-incompatible";
    case ErrorCode::UnknownOrgan: return "unknown-organ";
    case ErrorCode::EmptyMask: return "empty-mask";
    case ErrorCode::EmptyBaseMask: return "empty-base-mask";
    case ErrorCode::EmptyDonorMask: return "empty-donor-mask";
    case ErrorCode::MissingVolume: return "missing-volume";
    case ErrorCode::UnboundedHole: return "unbounded-hole";
    case ErrorCode::NoCasesFound: return "no-cases-found";
    case ErrorCode::SpecInfeasible: return "spec-infeasible";
    case ErrorCode::ConfigError: return "config-error";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown-error";
}

std::size_t byte_size(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16: return 2;
    case ScalarType::Int32: return 4;
    case ScalarType::Float32: return 4;
  }
  return 0;
}

const char* to_string(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return "uint8";
    case ScalarType::Int16: return "int16";
    case ScalarType::Int32: return "int32";
    case ScalarType::Float32: return "float32";
  }
  return "unknown";
}

bool VolumeGeometry::valid() const {
  if ((dims.array() < 1).any()) return false;
  if (!(spacing.array() > 0.0).all()) return false;
  const Eigen::RowVector4d last = affine.row(3);
  return last[0] == 0.0 && last[1] == 0.0 && last[2] == 0.0 && last[3] == 1.0;
}

bool geometry_compatible(const VolumeGeometry& a, const VolumeGeometry& b) {
  if (a.dims != b.dims) return false;
  for (int axis = 0; axis < 3; ++axis) {
    const double sa = a.spacing[axis];
    const double sb = b.spacing[axis];
    const double scale = std::max(std::abs(sa), std::abs(sb));
    if (std::abs(sa - sb) > 1e-3 * scale) return false;
  }
  return true;
}

BinaryMask make_mask(const VolumeGeometry& geometry) {
  BinaryMask mask;
  mask.geometry = geometry;
  mask.voxels = BinaryMask::Array::Constant(geometry.voxel_count(), false);
  return mask;
}

std::map<std::int32_t, std::string> auto_label_table(const VoxelGrid<std::int32_t>& grid) {
  std::map<std::int32_t, std::string> table;
  for (Eigen::Index i = 0; i < grid.voxels.size(); ++i) {
    const std::int32_t v = grid.voxels[i];
    if (v != 0) table.emplace(v, "organ_" + std::to_string(v));
  }
  return table;
}

void validate_label_volume(const LabelVolume& labels) {
  for (Eigen::Index i = 0; i < labels.voxels.size(); ++i) {
    const std::int32_t v = labels.voxels[i];
    if (v == 0) continue;
    if (v < 0) {
      throw Error(ErrorCode::InvalidArgument,
                  "negative label value " + std::to_string(v) + " at linear index " + std::to_string(i));
    }
    if (labels.label_table.find(v) == labels.label_table.end()) {
      throw Error(ErrorCode::InvalidArgument,
                  "label value " + std::to_string(v) + " missing from label table");
    }
  }
}

}  // namespace anatoforge
