// Binary-mask algebra: extraction, counting, shifting, overlap, the size
// ratio used by the planner, and the overlap-maximizing shift search.
#pragma once

#include "anatoforge/types.hpp"

namespace anatoforge {

// Integer voxel shift. A shift is in range for a grid when every component
// magnitude is at most the corresponding extent minus one.
struct ShiftOffset {
  int dx{0};
  int dy{0};
  int dz{0};

  friend bool operator==(const ShiftOffset&, const ShiftOffset&) = default;

  int chebyshev() const;
};

BinaryMask extract_mask(const LabelVolume& labels, std::int32_t organ);

std::int64_t popcount(const BinaryMask& mask);

// |popcount(donor) - popcount(base)| / popcount(base). Not symmetric: the
// base mask normalizes. Throws Error{EmptyBaseMask} when the base is empty.
double size_ratio(const BinaryMask& donor, const BinaryMask& base);
double size_ratio_counts(std::int64_t donor_count, std::int64_t base_count);

// Output bit (x,y,z) = input bit (x-dx, y-dy, z-dz); voxels shifted outside
// the grid are dropped, vacated voxels are zero. Nothing wraps.
BinaryMask shift_mask(const BinaryMask& mask, const ShiftOffset& d);

// Popcount of the voxelwise AND.
std::int64_t overlap(const BinaryMask& a, const BinaryMask& b);

// Mean coordinate of the set voxels. Requires a nonempty mask.
Eigen::Vector3d centroid(const BinaryMask& mask);

struct ShiftSearchResult {
  ShiftOffset shift;
  std::int64_t overlap{0};
};

// Maximizes overlap(base, shift_mask(donor, d)) over the search window: a box
// of +-window per axis around the rounded centroid difference, clamped to in-
// range shifts. Ties break toward the smallest Chebyshev magnitude, then the
// lexicographically smallest (dx,dy,dz).
//
// best_shift runs a frequency-domain cross-correlation of the two indicator
// grids and re-verifies the winning candidate by direct overlap; it returns
// the same result as best_shift_exhaustive, which enumerates every shift in
// the window directly and serves as the oracle.
ShiftSearchResult best_shift(const BinaryMask& base, const BinaryMask& donor,
                             const ShiftOffset& window);
ShiftSearchResult best_shift_exhaustive(const BinaryMask& base, const BinaryMask& donor,
                                        const ShiftOffset& window);

}  // namespace anatoforge
