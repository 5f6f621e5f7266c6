#include "anatoforge/transplant.hpp"

#include "anatoforge/nifti.hpp"

#include <algorithm>
#include <cstdio>

namespace anatoforge {
namespace {

void require_exists(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingVolume, path.string());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace

std::shared_ptr<const IntensityVolume> VolumeStore::intensity(const std::filesystem::path& path) {
  const std::string key = path.string();
  if (cache_) {
    std::lock_guard lock(mutex_);
    const auto it = intensity_.find(key);
    if (it != intensity_.end()) return it->second;
  }
  require_exists(path);
  auto volume = std::make_shared<const IntensityVolume>(load_intensity(path));
  if (cache_) {
    std::lock_guard lock(mutex_);
    intensity_.emplace(key, volume);
  }
  return volume;
}

std::shared_ptr<const LabelVolume> VolumeStore::labels(const std::filesystem::path& path) {
  const std::string key = path.string();
  if (cache_) {
    std::lock_guard lock(mutex_);
    const auto it = labels_.find(key);
    if (it != labels_.end()) return it->second;
  }
  require_exists(path);
  auto volume = std::make_shared<const LabelVolume>(load_labels(path));
  if (cache_) {
    std::lock_guard lock(mutex_);
    labels_.emplace(key, volume);
  }
  return volume;
}

BinaryMask hole_mask(const std::vector<BinaryMask>& base_masks,
                     const std::vector<BinaryMask>& placed_masks) {
  if (base_masks.empty()) {
    throw Error(ErrorCode::InvalidArgument, "hole_mask needs at least one base mask");
  }
  BinaryMask holes = make_mask(base_masks.front().geometry);
  for (const auto& m : base_masks) {
    if (!geometry_compatible(m.geometry, holes.geometry)) {
      throw Error(ErrorCode::GeometryMismatch, "hole_mask base masks on different grids");
    }
    holes.voxels = holes.voxels || m.voxels;
  }
  for (const auto& m : placed_masks) {
    if (!geometry_compatible(m.geometry, holes.geometry)) {
      throw Error(ErrorCode::GeometryMismatch, "hole_mask placed masks on different grids");
    }
    holes.voxels = holes.voxels && !m.voxels;
  }
  return holes;
}

TransplantResult transplant(const AugmentationPlan& plan, const DatasetIndex& index,
                            const ShiftOffset& window, VolumeStore& store) {
  const std::int64_t bi = index.case_index(plan.background);
  if (bi < 0) {
    throw Error(ErrorCode::InvalidArgument, "background case " + plan.background + " not in index");
  }
  if (plan.donors.size() != index.organs.size()) {
    throw Error(ErrorCode::InvalidArgument, "plan does not cover every target organ exactly once");
  }
  const CaseEntry& background = index.cases[static_cast<std::size_t>(bi)];

  const auto bg_image = store.intensity(background.image);
  const auto bg_labels = store.labels(background.label);
  if (!geometry_compatible(bg_image->geometry, index.geometry) ||
      !geometry_compatible(bg_labels->geometry, index.geometry)) {
    throw Error(ErrorCode::GeometryIncompatible, "background " + background.id);
  }

  TransplantResult result;
  result.image.geometry = bg_image->geometry;
  result.image.voxels = bg_image->voxels;
  result.image.dtype = bg_image->dtype;
  result.labels.geometry = bg_labels->geometry;
  result.labels.voxels = LabelVolume::Array::Zero(bg_labels->voxels.size());
  result.labels.dtype = bg_labels->dtype;
  result.labels.label_table = index.organ_names;

  BinaryMask covered = make_mask(index.geometry);
  BinaryMask base_union = make_mask(index.geometry);
  const auto& dims = index.geometry.dims;

  for (const std::int32_t organ : index.organs) {
    const auto donor_it = plan.donors.find(organ);
    if (donor_it == plan.donors.end()) {
      throw Error(ErrorCode::InvalidArgument, "plan lacks a donor for organ " + std::to_string(organ));
    }
    const std::int64_t di = index.case_index(donor_it->second);
    if (di < 0) {
      throw Error(ErrorCode::InvalidArgument, "donor case " + donor_it->second + " not in index");
    }
    const CaseEntry& donor = index.cases[static_cast<std::size_t>(di)];
    const auto donor_image = store.intensity(donor.image);
    const auto donor_labels = store.labels(donor.label);
    if (!geometry_compatible(donor_image->geometry, index.geometry) ||
        !geometry_compatible(donor_labels->geometry, index.geometry)) {
      throw Error(ErrorCode::GeometryIncompatible, "donor " + donor.id);
    }

    BinaryMask base_mask;
    base_mask.geometry = bg_labels->geometry;
    base_mask.voxels = (bg_labels->voxels == organ);
    if (popcount(base_mask) == 0) {
      throw Error(ErrorCode::EmptyMask,
                  "background " + background.id + " lacks organ " + std::to_string(organ));
    }
    BinaryMask donor_mask;
    donor_mask.geometry = donor_labels->geometry;
    donor_mask.voxels = (donor_labels->voxels == organ);
    if (popcount(donor_mask) == 0) {
      throw Error(ErrorCode::EmptyDonorMask,
                  "donor " + donor.id + " lacks organ " + std::to_string(organ));
    }

    const ShiftSearchResult found = best_shift(base_mask, donor_mask, window);
    const ShiftOffset d = found.shift;

    // Paste donor intensities and labels under the shifted donor mask only;
    // later organs in table order overwrite earlier ones.
    std::int64_t src = 0;
    for (int z = 0; z < dims[2]; ++z) {
      const int tz = z + d.dz;
      for (int y = 0; y < dims[1]; ++y) {
        const int ty = y + d.dy;
        for (int x = 0; x < dims[0]; ++x, ++src) {
          if (!donor_mask.voxels[src]) continue;
          const int tx = x + d.dx;
          if (tx < 0 || tx >= dims[0] || ty < 0 || ty >= dims[1] || tz < 0 || tz >= dims[2]) continue;
          const std::int64_t dst = index.geometry.index_of(tx, ty, tz);
          if (covered.voxels[dst]) ++result.collision_voxels;
          covered.voxels[dst] = true;
          result.image.voxels[dst] = donor_image->voxels[src];
          result.labels.voxels[dst] = organ;
        }
      }
    }

    base_union.voxels = base_union.voxels || base_mask.voxels;

    const Eigen::Index oj = index.organ_index(organ);
    OrganShift record;
    record.shift = d;
    record.overlap = found.overlap;
    record.size_ratio = size_ratio_counts(index.counts(di, oj), index.counts(bi, oj));
    result.shifts[organ] = record;
  }

  result.holes.geometry = index.geometry;
  result.holes.voxels = base_union.voxels && !covered.voxels;
  return result;
}

std::string output_stem(const AugmentationPlan& plan, const std::vector<std::int32_t>& organ_order) {
  std::string stem = sanitize(plan.background);
  std::string key = plan.background;
  for (const std::int32_t organ : organ_order) {
    const auto it = plan.donors.find(organ);
    if (it == plan.donors.end()) continue;
    stem += "__" + std::to_string(organ) + "-" + sanitize(it->second);
    key += "|" + std::to_string(organ) + ":" + it->second;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a(key)));
  return stem + "__" + std::string(hex, hex + 8);
}

}  // namespace anatoforge
