// Hole filling: converged Jacobi iteration of the discrete Laplace equation
// over the hole voxels, with all non-hole voxels as Dirichlet boundary. A
// deterministic stand-in for learned inpainting that keeps the fill within
// the range of its boundary values.
#pragma once

#include "anatoforge/types.hpp"

#include <vector>

namespace anatoforge {

struct InpaintConfig {
  int max_iterations{10000};
  double tolerance{0.5};  // max absolute per-voxel update, HU
};

struct FillStats {
  int iterations{0};
  double final_max_update{0.0};
  std::vector<double> max_updates;  // one entry per iteration
};

// Replaces hole voxels by the harmonic interpolant of the surrounding
// non-hole values (6-connected). Non-hole voxels pass through untouched.
// A hole component with no non-hole neighbor anywhere is rejected as
// Error{UnboundedHole}.
IntensityVolume diffusion_fill(const IntensityVolume& image, const BinaryMask& holes,
                               const InpaintConfig& cfg, FillStats* stats = nullptr);

// Voxelwise select: filled where holes, original elsewhere (bit-exact).
IntensityVolume blend(const IntensityVolume& filled, const IntensityVolume& original,
                      const BinaryMask& holes);

}  // namespace anatoforge
