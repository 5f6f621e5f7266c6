#include "anatoforge/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace anatoforge {
namespace {

constexpr int kNeighbors[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                  {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};

struct HoleVoxel {
  double fixed_sum{0.0};              // Dirichlet contribution from non-hole neighbors
  int degree{0};                      // in-grid neighbor count
  int component{-1};
  std::vector<std::int32_t> hole_neighbors;  // indices into the hole voxel list
};

}  // namespace

IntensityVolume diffusion_fill(const IntensityVolume& image, const BinaryMask& holes,
                               const InpaintConfig& cfg, FillStats* stats) {
  if (!geometry_compatible(image.geometry, holes.geometry)) {
    throw Error(ErrorCode::GeometryMismatch, "diffusion_fill image and hole mask grids differ");
  }
  if (cfg.max_iterations < 1 || !(cfg.tolerance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "inpaint config needs max_iterations >= 1 and tolerance > 0");
  }

  IntensityVolume out;
  out.geometry = image.geometry;
  out.voxels = image.voxels;
  out.dtype = image.dtype;
  if (stats) *stats = FillStats{};

  const auto& dims = image.geometry.dims;
  std::vector<std::int32_t> hole_id(static_cast<std::size_t>(image.geometry.voxel_count()), -1);
  std::vector<std::int64_t> hole_linear;
  {
    std::int64_t i = 0;
    for (int z = 0; z < dims[2]; ++z) {
      for (int y = 0; y < dims[1]; ++y) {
        for (int x = 0; x < dims[0]; ++x, ++i) {
          if (holes.voxels[i]) {
            hole_id[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(hole_linear.size());
            hole_linear.push_back(i);
          }
        }
      }
    }
  }
  if (hole_linear.empty()) return out;

  const auto n_holes = static_cast<std::int32_t>(hole_linear.size());
  std::vector<HoleVoxel> nodes(static_cast<std::size_t>(n_holes));
  {
    std::int32_t h = 0;
    std::int64_t i = 0;
    for (int z = 0; z < dims[2]; ++z) {
      for (int y = 0; y < dims[1]; ++y) {
        for (int x = 0; x < dims[0]; ++x, ++i) {
          if (!holes.voxels[i]) continue;
          HoleVoxel& node = nodes[static_cast<std::size_t>(h)];
          for (const auto& step : kNeighbors) {
            const int nx = x + step[0], ny = y + step[1], nz = z + step[2];
            if (!image.geometry.contains(nx, ny, nz)) continue;
            ++node.degree;
            const std::int64_t ni = image.geometry.index_of(nx, ny, nz);
            const std::int32_t nh = hole_id[static_cast<std::size_t>(ni)];
            if (nh >= 0) {
              node.hole_neighbors.push_back(nh);
            } else {
              node.fixed_sum += image.voxels[ni];
            }
          }
          ++h;
        }
      }
    }
  }

  // Components (6-connected within the hole set); each needs boundary data.
  std::vector<double> component_sum;
  std::vector<std::int64_t> component_boundary;
  std::vector<std::int32_t> stack;
  for (std::int32_t h = 0; h < n_holes; ++h) {
    if (nodes[static_cast<std::size_t>(h)].component >= 0) continue;
    const auto comp = static_cast<std::int32_t>(component_sum.size());
    component_sum.push_back(0.0);
    component_boundary.push_back(0);
    stack.assign(1, h);
    nodes[static_cast<std::size_t>(h)].component = comp;
    while (!stack.empty()) {
      const std::int32_t cur = stack.back();
      stack.pop_back();
      const HoleVoxel& node = nodes[static_cast<std::size_t>(cur)];
      const int fixed_count = node.degree - static_cast<int>(node.hole_neighbors.size());
      component_sum[static_cast<std::size_t>(comp)] += node.fixed_sum;
      component_boundary[static_cast<std::size_t>(comp)] += fixed_count;
      for (const std::int32_t nh : node.hole_neighbors) {
        if (nodes[static_cast<std::size_t>(nh)].component < 0) {
          nodes[static_cast<std::size_t>(nh)].component = comp;
          stack.push_back(nh);
        }
      }
    }
    if (component_boundary[static_cast<std::size_t>(comp)] == 0) {
      throw Error(ErrorCode::UnboundedHole,
                  "hole component " + std::to_string(comp) + " has no non-hole neighbor");
    }
  }

  // Start each component from its boundary mean; Jacobi keeps every iterate
  // inside the boundary value range from there.
  std::vector<double> value(static_cast<std::size_t>(n_holes));
  for (std::int32_t h = 0; h < n_holes; ++h) {
    const auto comp = static_cast<std::size_t>(nodes[static_cast<std::size_t>(h)].component);
    value[static_cast<std::size_t>(h)] = component_sum[comp] / static_cast<double>(component_boundary[comp]);
  }

  std::vector<double> next(static_cast<std::size_t>(n_holes));
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    double max_update = 0.0;
    for (std::int32_t h = 0; h < n_holes; ++h) {
      const HoleVoxel& node = nodes[static_cast<std::size_t>(h)];
      double sum = node.fixed_sum;
      for (const std::int32_t nh : node.hole_neighbors) sum += value[static_cast<std::size_t>(nh)];
      const double updated = sum / static_cast<double>(node.degree);
      max_update = std::max(max_update, std::abs(updated - value[static_cast<std::size_t>(h)]));
      next[static_cast<std::size_t>(h)] = updated;
    }
    value.swap(next);
    if (stats) {
      stats->iterations = iter + 1;
      stats->final_max_update = max_update;
      stats->max_updates.push_back(max_update);
    }
    if (max_update < cfg.tolerance) break;
  }

  for (std::int32_t h = 0; h < n_holes; ++h) {
    out.voxels[hole_linear[static_cast<std::size_t>(h)]] =
        static_cast<float>(value[static_cast<std::size_t>(h)]);
  }
  return out;
}

IntensityVolume blend(const IntensityVolume& filled, const IntensityVolume& original,
                      const BinaryMask& holes) {
  if (!geometry_compatible(filled.geometry, original.geometry) ||
      !geometry_compatible(filled.geometry, holes.geometry)) {
    throw Error(ErrorCode::GeometryMismatch, "blend inputs on different grids");
  }
  IntensityVolume out;
  out.geometry = original.geometry;
  out.dtype = original.dtype;
  out.voxels = holes.voxels.select(filled.voxels, original.voxels);
  return out;
}

}  // namespace anatoforge
