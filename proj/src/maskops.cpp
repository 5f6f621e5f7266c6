#include "anatoforge/maskops.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <tuple>
#include <vector>

namespace anatoforge {
namespace {

void require_compatible(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (!geometry_compatible(a.geometry, b.geometry)) {
    throw Error(ErrorCode::GeometryMismatch, what);
  }
}

std::vector<Eigen::Vector3i> set_voxels(const BinaryMask& mask) {
  std::vector<Eigen::Vector3i> out;
  out.reserve(static_cast<std::size_t>(mask.voxels.count()));
  const auto& dims = mask.geometry.dims;
  std::int64_t i = 0;
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x, ++i) {
        if (mask.voxels[i]) out.emplace_back(x, y, z);
      }
    }
  }
  return out;
}

std::int64_t overlap_at(const BinaryMask& base, const std::vector<Eigen::Vector3i>& donor_voxels,
                        const ShiftOffset& d) {
  const auto& dims = base.geometry.dims;
  std::int64_t count = 0;
  for (const auto& v : donor_voxels) {
    const int x = v[0] + d.dx;
    const int y = v[1] + d.dy;
    const int z = v[2] + d.dz;
    if (x < 0 || x >= dims[0] || y < 0 || y >= dims[1] || z < 0 || z >= dims[2]) continue;
    count += base.voxels[base.geometry.index_of(x, y, z)];
  }
  return count;
}

// (value desc, Chebyshev magnitude asc, lexicographic asc)
bool better(std::int64_t v1, const ShiftOffset& d1, std::int64_t v2, const ShiftOffset& d2) {
  if (v1 != v2) return v1 > v2;
  const int c1 = d1.chebyshev();
  const int c2 = d2.chebyshev();
  if (c1 != c2) return c1 < c2;
  return std::tie(d1.dx, d1.dy, d1.dz) < std::tie(d2.dx, d2.dy, d2.dz);
}

struct SearchWindow {
  Eigen::Vector3i lo;
  Eigen::Vector3i hi;
};

// Box of +-window around the rounded centroid difference, clamped to shifts
// that keep at least one voxel in range.
SearchWindow search_window(const BinaryMask& base, const BinaryMask& donor,
                           const ShiftOffset& window) {
  if (window.dx < 0 || window.dy < 0 || window.dz < 0) {
    throw Error(ErrorCode::InvalidArgument, "search window components must be non-negative");
  }
  const Eigen::Vector3d diff = centroid(base) - centroid(donor);
  const Eigen::Vector3i radius(window.dx, window.dy, window.dz);
  SearchWindow w;
  for (int axis = 0; axis < 3; ++axis) {
    const int bound = base.geometry.dims[axis] - 1;
    const int center = static_cast<int>(std::llround(diff[axis]));
    w.lo[axis] = std::max(center - radius[axis], -bound);
    w.hi[axis] = std::min(center + radius[axis], bound);
  }
  return w;
}

void check_search_inputs(const BinaryMask& base, const BinaryMask& donor) {
  require_compatible(base, donor, "best_shift requires masks on the same grid");
  if (popcount(base) == 0) throw Error(ErrorCode::EmptyMask, "base mask is empty");
  if (popcount(donor) == 0) throw Error(ErrorCode::EmptyMask, "donor mask is empty");
}

template <typename Eval>
ShiftSearchResult scan_window(const SearchWindow& w, Eval&& value_at) {
  ShiftSearchResult best;
  bool first = true;
  for (int dz = w.lo[2]; dz <= w.hi[2]; ++dz) {
    for (int dy = w.lo[1]; dy <= w.hi[1]; ++dy) {
      for (int dx = w.lo[0]; dx <= w.hi[0]; ++dx) {
        const ShiftOffset d{dx, dy, dz};
        const std::int64_t v = value_at(d);
        if (first || better(v, d, best.overlap, best.shift)) {
          best = {d, v};
          first = false;
        }
      }
    }
  }
  return best;
}

// ---- frequency-domain cross-correlation -----------------------------------

int next_fast_size(int n) {
  for (;; ++n) {
    int m = n;
    for (const int f : {2, 3, 5}) {
      while (m % f == 0) m /= f;
    }
    if (m == 1) return n;
  }
}

using ComplexGrid = std::vector<std::complex<double>>;

template <typename LineOp>
void for_each_line(const Eigen::Vector3i& p, int axis, LineOp&& op) {
  const std::int64_t sx = 1;
  const std::int64_t sy = p[0];
  const std::int64_t sz = static_cast<std::int64_t>(p[0]) * p[1];
  if (axis == 0) {
    for (int z = 0; z < p[2]; ++z)
      for (int y = 0; y < p[1]; ++y) op(y * sy + z * sz, sx);
  } else if (axis == 1) {
    for (int z = 0; z < p[2]; ++z)
      for (int x = 0; x < p[0]; ++x) op(x + z * sz, sy);
  } else {
    for (int y = 0; y < p[1]; ++y)
      for (int x = 0; x < p[0]; ++x) op(x + y * sy, sz);
  }
}

void fft_pass(ComplexGrid& g, const Eigen::Vector3i& p, int axis, bool inverse) {
  Eigen::FFT<double> fft;
  const int n = p[axis];
  std::vector<std::complex<double>> in(n), out(n);
  for_each_line(p, axis, [&](std::int64_t base, std::int64_t stride) {
    for (int i = 0; i < n; ++i) in[i] = g[base + i * stride];
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
    for (int i = 0; i < n; ++i) g[base + i * stride] = out[i];
  });
}

// Forward 3-D transform of a 0/1 indicator grid; the x-axis pass feeds real
// rows to the real-to-complex transform, y and z run complex.
ComplexGrid fft_forward_indicator(const BinaryMask& mask, const Eigen::Vector3i& p) {
  ComplexGrid g(static_cast<std::size_t>(p[0]) * p[1] * p[2]);
  const auto& dims = mask.geometry.dims;
  Eigen::FFT<double> fft;
  std::vector<double> row(p[0], 0.0);
  std::vector<std::complex<double>> spectrum(p[0]);
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      std::fill(row.begin(), row.end(), 0.0);
      const std::int64_t src = mask.geometry.index_of(0, y, z);
      for (int x = 0; x < dims[0]; ++x) row[x] = mask.voxels[src + x] ? 1.0 : 0.0;
      fft.fwd(spectrum, row);
      const std::int64_t dst = static_cast<std::int64_t>(p[0]) * (y + static_cast<std::int64_t>(p[1]) * z);
      std::copy(spectrum.begin(), spectrum.end(), g.begin() + dst);
    }
  }
  fft_pass(g, p, 1, false);
  fft_pass(g, p, 2, false);
  return g;
}

struct CorrelationGrid {
  Eigen::Vector3i padded;
  ComplexGrid values;

  double at(const ShiftOffset& d) const {
    auto wrap = [](int v, int p) { return ((v % p) + p) % p; };
    const std::int64_t ix = wrap(d.dx, padded[0]);
    const std::int64_t iy = wrap(d.dy, padded[1]);
    const std::int64_t iz = wrap(d.dz, padded[2]);
    return values[ix + padded[0] * (iy + padded[1] * iz)].real();
  }
};

// c[d] = sum_x base(x) * donor(x - d), all lags at once. Padding to at least
// 2n-1 per axis keeps circular wrap-around out of the in-range lag window.
CorrelationGrid correlate(const BinaryMask& base, const BinaryMask& donor) {
  CorrelationGrid corr;
  for (int axis = 0; axis < 3; ++axis) {
    corr.padded[axis] = next_fast_size(2 * base.geometry.dims[axis] - 1);
  }
  ComplexGrid a = fft_forward_indicator(base, corr.padded);
  const ComplexGrid b = fft_forward_indicator(donor, corr.padded);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= std::conj(b[i]);
  fft_pass(a, corr.padded, 2, true);
  fft_pass(a, corr.padded, 1, true);
  fft_pass(a, corr.padded, 0, true);
  corr.values = std::move(a);
  return corr;
}

}  // namespace

int ShiftOffset::chebyshev() const {
  return std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
}

BinaryMask extract_mask(const LabelVolume& labels, std::int32_t organ) {
  if (labels.label_table.find(organ) == labels.label_table.end()) {
    throw Error(ErrorCode::UnknownOrgan, "organ " + std::to_string(organ) + " not in label table");
  }
  BinaryMask mask;
  mask.geometry = labels.geometry;
  mask.voxels = (labels.voxels == organ);
  return mask;
}

std::int64_t popcount(const BinaryMask& mask) { return mask.voxels.count(); }

double size_ratio_counts(std::int64_t donor_count, std::int64_t base_count) {
  if (base_count <= 0) {
    throw Error(ErrorCode::EmptyBaseMask, "size ratio needs a nonempty base mask");
  }
  return static_cast<double>(std::abs(donor_count - base_count)) / static_cast<double>(base_count);
}

double size_ratio(const BinaryMask& donor, const BinaryMask& base) {
  return size_ratio_counts(popcount(donor), popcount(base));
}

BinaryMask shift_mask(const BinaryMask& mask, const ShiftOffset& d) {
  const auto& dims = mask.geometry.dims;
  if (std::abs(d.dx) > dims[0] - 1 || std::abs(d.dy) > dims[1] - 1 || std::abs(d.dz) > dims[2] - 1) {
    throw Error(ErrorCode::InvalidArgument, "shift exceeds grid extent");
  }
  BinaryMask out = make_mask(mask.geometry);
  const int x0 = std::max(0, d.dx), x1 = std::min(dims[0], dims[0] + d.dx);
  const int y0 = std::max(0, d.dy), y1 = std::min(dims[1], dims[1] + d.dy);
  const int z0 = std::max(0, d.dz), z1 = std::min(dims[2], dims[2] + d.dz);
  for (int z = z0; z < z1; ++z) {
    for (int y = y0; y < y1; ++y) {
      const std::int64_t dst = mask.geometry.index_of(x0, y, z);
      const std::int64_t src = mask.geometry.index_of(x0 - d.dx, y - d.dy, z - d.dz);
      for (int x = 0; x < x1 - x0; ++x) out.voxels[dst + x] = mask.voxels[src + x];
    }
  }
  return out;
}

std::int64_t overlap(const BinaryMask& a, const BinaryMask& b) {
  require_compatible(a, b, "overlap requires masks on the same grid");
  return (a.voxels && b.voxels).count();
}

Eigen::Vector3d centroid(const BinaryMask& mask) {
  const auto& dims = mask.geometry.dims;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::int64_t count = 0;
  std::int64_t i = 0;
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x, ++i) {
        if (mask.voxels[i]) {
          sum += Eigen::Vector3d(x, y, z);
          ++count;
        }
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyMask, "centroid of an empty mask");
  return sum / static_cast<double>(count);
}

ShiftSearchResult best_shift_exhaustive(const BinaryMask& base, const BinaryMask& donor,
                                        const ShiftOffset& window) {
  check_search_inputs(base, donor);
  const SearchWindow w = search_window(base, donor, window);
  const std::vector<Eigen::Vector3i> donor_voxels = set_voxels(donor);
  return scan_window(w, [&](const ShiftOffset& d) { return overlap_at(base, donor_voxels, d); });
}

ShiftSearchResult best_shift(const BinaryMask& base, const BinaryMask& donor,
                             const ShiftOffset& window) {
  check_search_inputs(base, donor);
  const SearchWindow w = search_window(base, donor, window);
  const CorrelationGrid corr = correlate(base, donor);
  ShiftSearchResult best =
      scan_window(w, [&](const ShiftOffset& d) { return std::llround(corr.at(d)); });

  // Counts recovered from the float correlation must never decide the argmax
  // on their own: re-verify the winner exactly, and on any disagreement fall
  // back to direct enumeration of the window.
  const std::vector<Eigen::Vector3i> donor_voxels = set_voxels(donor);
  const std::int64_t exact = overlap_at(base, donor_voxels, best.shift);
  if (exact != best.overlap) {
    return scan_window(w, [&](const ShiftOffset& d) { return overlap_at(base, donor_voxels, d); });
  }
  best.overlap = exact;
  return best;
}

}  // namespace anatoforge
