#include "anatoforge/phantom.hpp"

#include "anatoforge/nifti.hpp"
#include "anatoforge/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace anatoforge {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::ConfigError, "expected a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string case_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%03d", i);
  return buf;
}

struct RealizedOrgan {
  const OrganSpec* spec;
  Eigen::Vector3d center;
  Eigen::Vector3d semi_axes;
  double intensity;
};

bool inside(const RealizedOrgan& organ, int x, int y, int z) {
  const Eigen::Vector3d p(x, y, z);
  const Eigen::Vector3d rel = p - organ.center;
  if (organ.spec->shape == OrganShape::Box) {
    return (rel.array().abs() <= organ.semi_axes.array()).all();
  }
  const Eigen::Vector3d q = rel.array() / organ.semi_axes.array();
  return q.squaredNorm() <= 1.0;
}

CaseTruth generate_case(const PhantomSpec& spec, int case_idx,
                        const std::filesystem::path& out_dir) {
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(case_idx)));

  std::vector<RealizedOrgan> realized;
  realized.reserve(spec.organs.size());
  for (const OrganSpec& organ : spec.organs) {
    RealizedOrgan r;
    r.spec = &organ;
    const double scale = 1.0 + rng.uniform(-organ.size_jitter, organ.size_jitter);
    Eigen::Vector3d offset;
    for (int axis = 0; axis < 3; ++axis) {
      offset[axis] = static_cast<double>(rng.uniform_int(-organ.position_jitter, organ.position_jitter));
    }
    r.center = organ.center + offset;
    r.semi_axes = organ.semi_axes * scale;
    r.intensity = rng.normal(organ.intensity_mean, organ.intensity_sigma);
    realized.push_back(r);
  }

  VolumeGeometry geometry;
  geometry.dims = spec.dims;
  geometry.spacing = spec.spacing;
  geometry.affine = Eigen::Matrix4d::Identity();
  geometry.affine(0, 0) = spec.spacing[0];
  geometry.affine(1, 1) = spec.spacing[1];
  geometry.affine(2, 2) = spec.spacing[2];

  LabelVolume labels;
  labels.geometry = geometry;
  labels.voxels = LabelVolume::Array::Zero(geometry.voxel_count());
  labels.dtype = ScalarType::UInt8;

  for (const RealizedOrgan& organ : realized) {
    // bounding box; the voxel-center rule decides membership
    Eigen::Vector3i lo, hi;
    for (int axis = 0; axis < 3; ++axis) {
      lo[axis] = std::max(0, static_cast<int>(std::ceil(organ.center[axis] - organ.semi_axes[axis])));
      hi[axis] = std::min(spec.dims[axis] - 1,
                          static_cast<int>(std::floor(organ.center[axis] + organ.semi_axes[axis])));
    }
    for (int z = lo[2]; z <= hi[2]; ++z) {
      for (int y = lo[1]; y <= hi[1]; ++y) {
        for (int x = lo[0]; x <= hi[0]; ++x) {
          if (inside(organ, x, y, z)) {
            labels.voxels[geometry.index_of(x, y, z)] = organ.spec->id;
          }
        }
      }
    }
  }
  for (const OrganSpec& organ : spec.organs) {
    labels.label_table[organ.id] =
        organ.name.empty() ? "organ_" + std::to_string(organ.id) : organ.name;
  }

  IntensityVolume image;
  image.geometry = geometry;
  image.dtype = ScalarType::Int16;
  image.voxels = IntensityVolume::Array::Constant(geometry.voxel_count(),
                                                  static_cast<float>(spec.background_hu));
  std::map<std::int32_t, double> intensity_of;
  for (const RealizedOrgan& organ : realized) intensity_of[organ.spec->id] = organ.intensity;
  for (Eigen::Index i = 0; i < labels.voxels.size(); ++i) {
    const std::int32_t v = labels.voxels[i];
    if (v != 0) image.voxels[i] = static_cast<float>(intensity_of[v]);
  }
  if (spec.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < image.voxels.size(); ++i) {
      image.voxels[i] += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
    }
  }

  CaseTruth truth;
  truth.id = case_name(case_idx);
  for (const RealizedOrgan& organ : realized) {
    OrganTruth t;
    t.organ = organ.spec->id;
    t.center = organ.center;
    t.semi_axes = organ.semi_axes;
    t.intensity = organ.intensity;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::int64_t count = 0;
    std::int64_t i = 0;
    for (int z = 0; z < spec.dims[2]; ++z) {
      for (int y = 0; y < spec.dims[1]; ++y) {
        for (int x = 0; x < spec.dims[0]; ++x, ++i) {
          if (labels.voxels[i] == organ.spec->id) {
            sum += Eigen::Vector3d(x, y, z);
            ++count;
          }
        }
      }
    }
    t.voxel_count = count;
    t.centroid = count > 0 ? Eigen::Vector3d(sum / static_cast<double>(count)) : Eigen::Vector3d::Zero();
    truth.organs.push_back(t);
  }

  const std::string file = truth.id + ".nii.gz";
  write_volume(image, out_dir / "images" / file);
  write_volume(labels, out_dir / "labels" / file);
  return truth;
}

void validate(const PhantomSpec& spec) {
  if (spec.n_cases < 1) throw Error(ErrorCode::SpecInfeasible, "n_cases must be at least 1");
  if ((spec.dims.array() < 1).any() || !(spec.spacing.array() > 0.0).all()) {
    throw Error(ErrorCode::SpecInfeasible, "dims must be positive and spacing > 0");
  }
  if (spec.organs.empty()) throw Error(ErrorCode::SpecInfeasible, "at least one organ is required");
  std::map<std::int32_t, int> seen;
  for (const OrganSpec& organ : spec.organs) {
    if (organ.id < 1 || organ.id > 255) {
      throw Error(ErrorCode::SpecInfeasible, "organ ids must be in [1, 255] for uint8 labels");
    }
    if (++seen[organ.id] > 1) {
      throw Error(ErrorCode::SpecInfeasible, "duplicate organ id " + std::to_string(organ.id));
    }
    if (organ.size_jitter < 0.0 || organ.size_jitter >= 1.0 || organ.position_jitter < 0) {
      throw Error(ErrorCode::SpecInfeasible, "size_jitter must be in [0,1), position_jitter >= 0");
    }
    if (!(organ.semi_axes.array() > 0.0).all()) {
      throw Error(ErrorCode::SpecInfeasible, "organ semi_axes must be positive");
    }
    for (int axis = 0; axis < 3; ++axis) {
      const double reach = organ.semi_axes[axis] * (1.0 + organ.size_jitter) + organ.position_jitter;
      if (organ.center[axis] - reach < 0.0 ||
          organ.center[axis] + reach > static_cast<double>(spec.dims[axis] - 1)) {
        throw Error(ErrorCode::SpecInfeasible,
                    "organ " + std::to_string(organ.id) + " can leave the grid under jitter");
      }
    }
  }
}

}  // namespace

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open phantom spec " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  PhantomSpec spec;
  try {
    if (j.contains("dims")) {
      const Eigen::Vector3d d = vec3(j["dims"]);
      spec.dims = d.cast<int>();
    }
    if (j.contains("spacing")) spec.spacing = vec3(j["spacing"]);
    spec.n_cases = j.value("n_cases", 1);
    spec.background_hu = j.value("background_hu", -1000.0);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", 0ULL);
    for (const auto& o : j.value("organs", json::array())) {
      OrganSpec organ;
      organ.id = o.at("id").get<std::int32_t>();
      organ.name = o.value("name", "");
      const std::string shape = o.value("shape", "ellipsoid");
      if (shape == "ellipsoid") {
        organ.shape = OrganShape::Ellipsoid;
      } else if (shape == "box") {
        organ.shape = OrganShape::Box;
      } else {
        throw Error(ErrorCode::ConfigError, "unknown organ shape: " + shape);
      }
      organ.center = vec3(o.at("center"));
      organ.semi_axes = vec3(o.at("semi_axes"));
      organ.size_jitter = o.value("size_jitter", 0.0);
      organ.position_jitter = o.value("position_jitter", 0);
      organ.intensity_mean = o.value("intensity_mean", 0.0);
      organ.intensity_sigma = o.value("intensity_sigma", 0.0);
      spec.organs.push_back(std::move(organ));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return spec;
}

PhantomTruth generate(const PhantomSpec& spec, const std::filesystem::path& out_dir, int workers) {
  validate(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "labels", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());

  PhantomTruth truth;
  truth.cases.resize(static_cast<std::size_t>(spec.n_cases));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.n_cases));

  const int n_workers = std::max(1, std::min(workers, spec.n_cases));
  if (n_workers == 1) {
    for (int i = 0; i < spec.n_cases; ++i) {
      truth.cases[static_cast<std::size_t>(i)] = generate_case(spec, i, out_dir);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= spec.n_cases) return;
          try {
            truth.cases[static_cast<std::size_t>(i)] = generate_case(spec, i, out_dir);
          } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ordered_json manifest;
  ordered_json organs = ordered_json::object();
  for (const OrganSpec& organ : spec.organs) {
    organs[std::to_string(organ.id)] =
        organ.name.empty() ? "organ_" + std::to_string(organ.id) : organ.name;
  }
  manifest["organs"] = std::move(organs);
  manifest["cases"] = ordered_json::array();
  for (const CaseTruth& c : truth.cases) {
    manifest["cases"].push_back({{"id", c.id},
                                 {"image", "images/" + c.id + ".nii.gz"},
                                 {"label", "labels/" + c.id + ".nii.gz"}});
  }
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw Error(ErrorCode::IoFailure, "cannot write manifest under " + out_dir.string());

  ordered_json metadata;
  metadata["seed"] = spec.seed;
  metadata["cases"] = ordered_json::array();
  for (const CaseTruth& c : truth.cases) {
    ordered_json jc;
    jc["id"] = c.id;
    ordered_json per = ordered_json::object();
    for (const OrganTruth& t : c.organs) {
      per[std::to_string(t.organ)] = {
          {"count", t.voxel_count},
          {"centroid", {t.centroid[0], t.centroid[1], t.centroid[2]}},
          {"center", {t.center[0], t.center[1], t.center[2]}},
          {"semi_axes", {t.semi_axes[0], t.semi_axes[1], t.semi_axes[2]}},
          {"intensity", t.intensity},
      };
    }
    jc["organs"] = std::move(per);
    metadata["cases"].push_back(std::move(jc));
  }
  std::ofstream md(out_dir / "metadata.json");
  md << metadata.dump(2) << '\n';
  if (!md) throw Error(ErrorCode::IoFailure, "cannot write metadata under " + out_dir.string());

  return truth;
}

}  // namespace anatoforge
