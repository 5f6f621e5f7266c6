#include "anatoforge/nifti.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace anatoforge {
namespace {

// Fixed 348-byte header, field offsets per the NIfTI-1 standard.
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;    // 0
  char data_type[10];         // 4
  char db_name[18];           // 14
  std::int32_t extents;       // 32
  std::int16_t session_error; // 36
  char regular;               // 38
  char dim_info;              // 39
  std::int16_t dim[8];        // 40
  float intent_p1;            // 56
  float intent_p2;            // 60
  float intent_p3;            // 64
  std::int16_t intent_code;   // 68
  std::int16_t datatype;      // 70
  std::int16_t bitpix;        // 72
  std::int16_t slice_start;   // 74
  float pixdim[8];            // 76
  float vox_offset;           // 108
  float scl_slope;            // 112
  float scl_inter;            // 116
  std::int16_t slice_end;     // 120
  char slice_code;            // 122
  char xyzt_units;            // 123
  float cal_max;              // 124
  float cal_min;              // 128
  float slice_duration;       // 132
  float toffset;              // 136
  std::int32_t glmax;         // 140
  std::int32_t glmin;         // 144
  char descrip[80];           // 148
  char aux_file[24];          // 228
  std::int16_t qform_code;    // 252
  std::int16_t sform_code;    // 254
  float quatern_b;            // 256
  float quatern_c;            // 260
  float quatern_d;            // 264
  float qoffset_x;            // 268
  float qoffset_y;            // 272
  float qoffset_z;            // 276
  float srow_x[4];            // 280
  float srow_y[4];            // 296
  float srow_z[4];            // 312
  char intent_name[16];       // 328
  char magic[4];              // 344
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348);
static_assert(offsetof(Nifti1Header, datatype) == 70);
static_assert(offsetof(Nifti1Header, bitpix) == 72);
static_assert(offsetof(Nifti1Header, pixdim) == 76);
static_assert(offsetof(Nifti1Header, vox_offset) == 108);
static_assert(offsetof(Nifti1Header, scl_slope) == 112);
static_assert(offsetof(Nifti1Header, scl_inter) == 116);
static_assert(offsetof(Nifti1Header, sform_code) == 254);
static_assert(offsetof(Nifti1Header, srow_x) == 280);
static_assert(offsetof(Nifti1Header, srow_y) == 296);
static_assert(offsetof(Nifti1Header, srow_z) == 312);
static_assert(offsetof(Nifti1Header, magic) == 344);

constexpr std::int16_t kDtUInt8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;

std::int16_t datatype_code(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return kDtUInt8;
    case ScalarType::Int16: return kDtInt16;
    case ScalarType::Int32: return kDtInt32;
    case ScalarType::Float32: return kDtFloat32;
  }
  return 0;
}

void swap_bytes(void* p, std::size_t size) {
  auto* b = static_cast<unsigned char*>(p);
  for (std::size_t i = 0, j = size - 1; i < j; ++i, --j) std::swap(b[i], b[j]);
}

template <typename T>
void swap_field(T& value) {
  if constexpr (sizeof(T) > 1) swap_bytes(&value, sizeof(T));
}

void swap_header(Nifti1Header& h) {
  swap_field(h.sizeof_hdr);
  swap_field(h.extents);
  swap_field(h.session_error);
  for (auto& d : h.dim) swap_field(d);
  swap_field(h.intent_p1);
  swap_field(h.intent_p2);
  swap_field(h.intent_p3);
  swap_field(h.intent_code);
  swap_field(h.datatype);
  swap_field(h.bitpix);
  swap_field(h.slice_start);
  for (auto& p : h.pixdim) swap_field(p);
  swap_field(h.vox_offset);
  swap_field(h.scl_slope);
  swap_field(h.scl_inter);
  swap_field(h.slice_end);
  swap_field(h.cal_max);
  swap_field(h.cal_min);
  swap_field(h.slice_duration);
  swap_field(h.toffset);
  swap_field(h.glmax);
  swap_field(h.glmin);
  swap_field(h.qform_code);
  swap_field(h.sform_code);
  swap_field(h.quatern_b);
  swap_field(h.quatern_c);
  swap_field(h.quatern_d);
  swap_field(h.qoffset_x);
  swap_field(h.qoffset_y);
  swap_field(h.qoffset_z);
  for (auto& s : h.srow_x) swap_field(s);
  for (auto& s : h.srow_y) swap_field(s);
  for (auto& s : h.srow_z) swap_field(s);
}

// Reads the whole file, transparently inflating gzip (0x1f 0x8b prefix).
std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  gzbuffer(f, 1 << 18);
  std::vector<std::uint8_t> data;
  std::vector<std::uint8_t> chunk(1 << 20);
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
    }
    data.insert(data.end(), chunk.begin(), chunk.begin() + n);
    if (n < static_cast<int>(chunk.size())) break;
  }
  gzclose(f);
  return data;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const std::string s = path.string();
  const bool gz = s.size() > 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
  if (gz) {
    gzFile f = gzopen(s.c_str(), "wb");
    if (f == nullptr) throw Error(ErrorCode::IoFailure, "cannot open " + s + " for writing");
    gzbuffer(f, 1 << 18);
    std::size_t done = 0;
    while (done < bytes.size()) {
      const unsigned want = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
      const int n = gzwrite(f, bytes.data() + done, want);
      if (n <= 0) {
        gzclose(f);
        throw Error(ErrorCode::IoFailure, "write failed for " + s);
      }
      done += static_cast<std::size_t>(n);
    }
    if (gzclose(f) != Z_OK) throw Error(ErrorCode::IoFailure, "close failed for " + s);
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + s + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + s);
  }
}

Eigen::Matrix4d affine_from_header(const Nifti1Header& h, const Eigen::Vector3d& spacing) {
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      affine(0, c) = h.srow_x[c];
      affine(1, c) = h.srow_y[c];
      affine(2, c) = h.srow_z[c];
    }
    return affine;
  }
  if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    Eigen::Matrix3d r;
    r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
         2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
         2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c;
    for (int col = 0; col < 3; ++col) {
      const double scale = spacing[col] * (col == 2 ? qfac : 1.0);
      affine.block<3, 1>(0, col) = r.col(col) * scale;
    }
    affine(0, 3) = h.qoffset_x;
    affine(1, 3) = h.qoffset_y;
    affine(2, 3) = h.qoffset_z;
    return affine;
  }
  affine(0, 0) = spacing[0];
  affine(1, 1) = spacing[1];
  affine(2, 2) = spacing[2];
  return affine;
}

template <typename Stored>
Eigen::ArrayXf decode_payload_f(const std::uint8_t* p, std::int64_t n, bool swap) {
  Eigen::ArrayXf out(n);
  for (std::int64_t i = 0; i < n; ++i) {
    Stored v;
    std::memcpy(&v, p + i * sizeof(Stored), sizeof(Stored));
    if (swap) swap_field(v);
    out[i] = static_cast<float>(v);
  }
  return out;
}

template <typename Stored>
Eigen::Array<std::int32_t, Eigen::Dynamic, 1> decode_payload_i(const std::uint8_t* p, std::int64_t n,
                                                               bool swap) {
  Eigen::Array<std::int32_t, Eigen::Dynamic, 1> out(n);
  for (std::int64_t i = 0; i < n; ++i) {
    Stored v;
    std::memcpy(&v, p + i * sizeof(Stored), sizeof(Stored));
    if (swap) swap_field(v);
    out[i] = static_cast<std::int32_t>(v);
  }
  return out;
}

template <typename Stored, typename Source>
void encode_payload(std::vector<std::uint8_t>& bytes, const Source& voxels,
                    Stored (*convert)(typename Source::Scalar)) {
  const std::size_t start = bytes.size();
  bytes.resize(start + static_cast<std::size_t>(voxels.size()) * sizeof(Stored));
  std::uint8_t* p = bytes.data() + start;
  for (Eigen::Index i = 0; i < voxels.size(); ++i) {
    Stored v = convert(voxels[i]);
    if constexpr (std::endian::native == std::endian::big) swap_field(v);
    std::memcpy(p + static_cast<std::size_t>(i) * sizeof(Stored), &v, sizeof(Stored));
  }
}

Nifti1Header parse_header(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path,
                          bool& swapped) {
  if (bytes.size() < sizeof(Nifti1Header)) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": file shorter than a NIfTI-1 header");
  }
  Nifti1Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));

  swapped = h.dim[0] < 1 || h.dim[0] > 7;
  if (swapped) swap_header(h);
  if (h.dim[0] < 1 || h.dim[0] > 7) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": dim[0] invalid in both byte orders");
  }
  if (h.sizeof_hdr != 348) {
    throw Error(ErrorCode::MalformedHeader,
                path.string() + ": sizeof_hdr is " + std::to_string(h.sizeof_hdr) +
                    ", expected 348 (NIfTI-2 is not supported)");
  }
  if (std::memcmp(h.magic, "ni1\0", 4) == 0) {
    throw Error(ErrorCode::MalformedHeader,
                path.string() + ": .hdr/.img pairs are not supported, expected single-file magic n+1");
  }
  if (std::memcmp(h.magic, "n+1\0", 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": bad magic bytes at offset 344");
  }
  return h;
}

struct RawVolume {
  VolumeGeometry geometry;
  ScalarType dtype;
  const std::uint8_t* payload;
  std::int64_t count;
  bool swapped;
  float scl_slope;
  float scl_inter;
};

RawVolume parse_volume(const std::vector<std::uint8_t>& bytes, const Nifti1Header& h, bool swapped,
                       const std::filesystem::path& path) {
  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + ": dim[0] is " + std::to_string(h.dim[0]) + ", expected 3 (or 4 with a singleton)");
  }
  if (h.dim[0] == 4 && h.dim[4] != 1) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + ": fourth extent is " + std::to_string(h.dim[4]) + ", expected 1");
  }

  ScalarType dtype;
  switch (h.datatype) {
    case kDtUInt8: dtype = ScalarType::UInt8; break;
    case kDtInt16: dtype = ScalarType::Int16; break;
    case kDtInt32: dtype = ScalarType::Int32; break;
    case kDtFloat32: dtype = ScalarType::Float32; break;
    default:
      throw Error(ErrorCode::UnsupportedDatatype,
                  path.string() + ": datatype code " + std::to_string(h.datatype));
  }

  RawVolume raw;
  raw.dtype = dtype;
  raw.swapped = swapped;
  raw.scl_slope = h.scl_slope;
  raw.scl_inter = h.scl_inter;
  for (int axis = 0; axis < 3; ++axis) {
    if (h.dim[axis + 1] < 1) {
      throw Error(ErrorCode::MalformedHeader,
                  path.string() + ": non-positive extent dim[" + std::to_string(axis + 1) + "]");
    }
    raw.geometry.dims[axis] = h.dim[axis + 1];
    const float pd = h.pixdim[axis + 1];
    raw.geometry.spacing[axis] = pd > 0.0f ? static_cast<double>(pd) : 1.0;
  }
  raw.geometry.affine = affine_from_header(h, raw.geometry.spacing);

  const auto vox_offset = static_cast<std::int64_t>(h.vox_offset);
  if (vox_offset < static_cast<std::int64_t>(sizeof(Nifti1Header))) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": vox_offset below header size");
  }
  raw.count = raw.geometry.voxel_count();
  const std::int64_t need = vox_offset + raw.count * static_cast<std::int64_t>(byte_size(dtype));
  if (static_cast<std::int64_t>(bytes.size()) < need) {
    throw Error(ErrorCode::TruncatedPayload,
                path.string() + ": file has " + std::to_string(bytes.size()) + " bytes, header declares " +
                    std::to_string(need));
  }
  raw.payload = bytes.data() + vox_offset;
  return raw;
}

bool scaling_nontrivial(float slope, float inter) {
  if (slope == 0.0f || !std::isfinite(slope) || !std::isfinite(inter)) return false;
  return slope != 1.0f || inter != 0.0f;
}

IntensityVolume make_intensity(const RawVolume& raw) {
  IntensityVolume v;
  v.geometry = raw.geometry;
  switch (raw.dtype) {
    case ScalarType::UInt8: v.voxels = decode_payload_f<std::uint8_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Int16: v.voxels = decode_payload_f<std::int16_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Int32: v.voxels = decode_payload_f<std::int32_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Float32: v.voxels = decode_payload_f<float>(raw.payload, raw.count, raw.swapped); break;
  }
  v.dtype = raw.dtype;
  if (scaling_nontrivial(raw.scl_slope, raw.scl_inter)) {
    v.voxels = v.voxels * raw.scl_slope + raw.scl_inter;
    v.dtype = ScalarType::Float32;
  } else if (raw.dtype == ScalarType::UInt8) {
    v.dtype = ScalarType::Int16;
  } else if (raw.dtype == ScalarType::Int32) {
    v.dtype = ScalarType::Float32;
  }
  return v;
}

LabelVolume make_labels(const RawVolume& raw, const std::filesystem::path& path) {
  LabelVolume v;
  v.geometry = raw.geometry;
  switch (raw.dtype) {
    case ScalarType::UInt8: v.voxels = decode_payload_i<std::uint8_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Int16: v.voxels = decode_payload_i<std::int16_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Int32: v.voxels = decode_payload_i<std::int32_t>(raw.payload, raw.count, raw.swapped); break;
    case ScalarType::Float32: {
      v.voxels.resize(raw.count);
      for (std::int64_t i = 0; i < raw.count; ++i) {
        float f;
        std::memcpy(&f, raw.payload + i * 4, 4);
        if (raw.swapped) swap_field(f);
        const float r = std::nearbyint(f);
        if (f != r || r < 0.0f || r > 2147483520.0f) {
          throw Error(ErrorCode::UnsupportedDatatype,
                      path.string() + ": float payload is not non-negative integer labels");
        }
        v.voxels[i] = static_cast<std::int32_t>(r);
      }
      break;
    }
  }
  if ((v.voxels < 0).any()) {
    throw Error(ErrorCode::UnsupportedDatatype, path.string() + ": negative values in label payload");
  }
  v.dtype = raw.dtype == ScalarType::Float32 ? ScalarType::Int32 : raw.dtype;
  v.label_table = auto_label_table(v);
  return v;
}

Nifti1Header make_header(const VolumeGeometry& geometry, ScalarType dtype) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int axis = 0; axis < 3; ++axis) {
    h.dim[axis + 1] = static_cast<std::int16_t>(geometry.dims[axis]);
    h.pixdim[axis + 1] = static_cast<float>(geometry.spacing[axis]);
  }
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.pixdim[0] = 1.0f;
  h.datatype = datatype_code(dtype);
  h.bitpix = static_cast<std::int16_t>(8 * byte_size(dtype));
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // millimetres
  h.sform_code = 1;
  h.qform_code = 0;
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(geometry.affine(0, c));
    h.srow_y[c] = static_cast<float>(geometry.affine(1, c));
    h.srow_z[c] = static_cast<float>(geometry.affine(2, c));
  }
  std::strncpy(h.descrip, "anatoforge", sizeof(h.descrip) - 1);
  std::memcpy(h.magic, "n+1\0", 4);
  return h;
}

void check_writable_geometry(const VolumeGeometry& geometry, const std::filesystem::path& path) {
  if (!geometry.valid()) {
    throw Error(ErrorCode::InvalidArgument,
                path.string() + ": volume geometry is invalid (empty dims, non-positive spacing, or bad affine row)");
  }
  for (int axis = 0; axis < 3; ++axis) {
    if (geometry.dims[axis] > std::numeric_limits<std::int16_t>::max()) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ": extent exceeds the NIfTI-1 int16 dim field");
    }
  }
}

std::vector<std::uint8_t> header_bytes(const Nifti1Header& h) {
  std::vector<std::uint8_t> bytes(sizeof(Nifti1Header) + 4, 0);  // header + zero extender
  Nifti1Header out = h;
  if constexpr (std::endian::native == std::endian::big) swap_header(out);
  std::memcpy(bytes.data(), &out, sizeof(out));
  return bytes;
}

}  // namespace

LoadedVolume load_volume(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  bool swapped = false;
  const Nifti1Header h = parse_header(bytes, path, swapped);
  const RawVolume raw = parse_volume(bytes, h, swapped, path);
  if (raw.dtype == ScalarType::UInt8 || raw.dtype == ScalarType::Int32) {
    return make_labels(raw, path);
  }
  return make_intensity(raw);
}

IntensityVolume load_intensity(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  bool swapped = false;
  const Nifti1Header h = parse_header(bytes, path, swapped);
  const RawVolume raw = parse_volume(bytes, h, swapped, path);
  return make_intensity(raw);
}

LabelVolume load_labels(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  bool swapped = false;
  const Nifti1Header h = parse_header(bytes, path, swapped);
  const RawVolume raw = parse_volume(bytes, h, swapped, path);
  if (scaling_nontrivial(raw.scl_slope, raw.scl_inter)) {
    throw Error(ErrorCode::UnsupportedDatatype,
                path.string() + ": scl scaling on a label volume is not meaningful");
  }
  return make_labels(raw, path);
}

void write_volume(const IntensityVolume& volume, const std::filesystem::path& path) {
  check_writable_geometry(volume.geometry, path);
  if (!volume.extent_ok()) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": voxel count does not match dims");
  }
  if (volume.dtype != ScalarType::Int16 && volume.dtype != ScalarType::Float32) {
    throw Error(ErrorCode::UnsupportedDatatype,
                path.string() + ": intensity volumes store int16 or float32, got " +
                    to_string(volume.dtype));
  }
  std::vector<std::uint8_t> bytes = header_bytes(make_header(volume.geometry, volume.dtype));
  if (volume.dtype == ScalarType::Int16) {
    encode_payload<std::int16_t>(bytes, volume.voxels, +[](float v) {
      const long r = std::lround(v);
      return static_cast<std::int16_t>(std::clamp<long>(r, -32768, 32767));
    });
  } else {
    encode_payload<float>(bytes, volume.voxels, +[](float v) { return v; });
  }
  write_file(path, bytes);
}

void write_volume(const LabelVolume& volume, const std::filesystem::path& path) {
  check_writable_geometry(volume.geometry, path);
  if (!volume.extent_ok()) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": voxel count does not match dims");
  }
  if (volume.dtype == ScalarType::Float32) {
    throw Error(ErrorCode::UnsupportedDatatype, path.string() + ": label volumes store integer dtypes");
  }
  const std::int32_t hi = volume.dtype == ScalarType::UInt8    ? 255
                          : volume.dtype == ScalarType::Int16 ? 32767
                                                              : std::numeric_limits<std::int32_t>::max();
  if ((volume.voxels < 0).any() || (volume.voxels > hi).any()) {
    throw Error(ErrorCode::InvalidArgument,
                path.string() + ": label values do not fit dtype " + to_string(volume.dtype));
  }
  std::vector<std::uint8_t> bytes = header_bytes(make_header(volume.geometry, volume.dtype));
  switch (volume.dtype) {
    case ScalarType::UInt8:
      encode_payload<std::uint8_t>(bytes, volume.voxels,
                                   +[](std::int32_t v) { return static_cast<std::uint8_t>(v); });
      break;
    case ScalarType::Int16:
      encode_payload<std::int16_t>(bytes, volume.voxels,
                                   +[](std::int32_t v) { return static_cast<std::int16_t>(v); });
      break;
    default:
      encode_payload<std::int32_t>(bytes, volume.voxels, +[](std::int32_t v) { return v; });
      break;
  }
  write_file(path, bytes);
}

}  // namespace anatoforge
