// Executes one augmentation plan: shifts each donor organ onto the
// background at the overlap-maximizing offset, composites image and labels
// by masked replacement, and reports the uncovered base-organ voxels as the
// hole mask.
#pragma once

#include "anatoforge/maskops.hpp"
#include "anatoforge/planner.hpp"

#include <filesystem>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace anatoforge {

struct OrganShift {
  ShiftOffset shift;
  std::int64_t overlap{0};
  double size_ratio{0.0};
};

struct TransplantResult {
  IntensityVolume image;   // composited output, holes still carry background HU
  LabelVolume labels;      // nonzero exactly on the union of placed donor masks
  BinaryMask holes;        // base-organ voxels no placed donor covers
  std::map<std::int32_t, OrganShift> shifts;
  std::int64_t collision_voxels{0};  // voxels written by more than one organ
};

// Memoizing loader shared by concurrent plan workers. Caching never changes
// results; it only avoids re-reading donor volumes used by many plans.
class VolumeStore {
 public:
  explicit VolumeStore(bool cache = true) : cache_(cache) {}

  std::shared_ptr<const IntensityVolume> intensity(const std::filesystem::path& path);
  std::shared_ptr<const LabelVolume> labels(const std::filesystem::path& path);

 private:
  bool cache_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<const IntensityVolume>> intensity_;
  std::unordered_map<std::string, std::shared_ptr<const LabelVolume>> labels_;
};

// (OR of base_masks) AND NOT (OR of placed_masks)
BinaryMask hole_mask(const std::vector<BinaryMask>& base_masks,
                     const std::vector<BinaryMask>& placed_masks);

TransplantResult transplant(const AugmentationPlan& plan, const DatasetIndex& index,
                            const ShiftOffset& window, VolumeStore& store);

// Deterministic output stem: <background>__<organ>-<donor>__...__<hash8>
std::string output_stem(const AugmentationPlan& plan, const std::vector<std::int32_t>& organ_order);

}  // namespace anatoforge
