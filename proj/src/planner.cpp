#include "anatoforge/planner.hpp"

#include "anatoforge/maskops.hpp"
#include "anatoforge/nifti.hpp"
#include "anatoforge/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <thread>

namespace anatoforge {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string case_stem(const std::filesystem::path& file) {
  std::string name = file.filename().string();
  for (const char* suffix : {".gz", ".nii"}) {
    const std::size_t len = std::strlen(suffix);
    if (name.size() > len && name.compare(name.size() - len, len, suffix) == 0) {
      name.erase(name.size() - len);
    }
  }
  return name;
}

std::map<std::int32_t, std::string> parse_organ_table(const json& j) {
  std::map<std::int32_t, std::string> table;
  for (const auto& [key, value] : j.items()) {
    table[std::stoi(key)] = value.get<std::string>();
  }
  return table;
}

struct DatasetLayout {
  std::vector<CaseEntry> cases;
  std::map<std::int32_t, std::string> organs;
};

DatasetLayout read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open manifest " + manifest.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "manifest " + manifest.string() + ": " + e.what());
  }
  DatasetLayout layout;
  const auto base = manifest.parent_path();
  if (!j.contains("cases") || !j["cases"].is_array()) {
    throw Error(ErrorCode::ConfigError, "manifest " + manifest.string() + ": missing cases array");
  }
  for (const auto& c : j["cases"]) {
    CaseEntry entry;
    entry.id = c.at("id").get<std::string>();
    entry.image = base / std::filesystem::path(c.at("image").get<std::string>());
    entry.label = base / std::filesystem::path(c.at("label").get<std::string>());
    layout.cases.push_back(std::move(entry));
  }
  if (j.contains("organs")) layout.organs = parse_organ_table(j["organs"]);
  return layout;
}

DatasetLayout discover_dataset(const std::filesystem::path& root) {
  const auto images_dir = root / "images";
  const auto labels_dir = root / "labels";
  if (!std::filesystem::is_directory(images_dir)) {
    throw Error(ErrorCode::NoCasesFound, "no manifest and no images/ directory under " + root.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(images_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 4 && (name.ends_with(".nii") || name.ends_with(".nii.gz"))) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  DatasetLayout layout;
  for (const auto& image : files) {
    const auto label = labels_dir / image.filename();
    if (!std::filesystem::exists(label)) {
      throw Error(ErrorCode::IoFailure, "label file missing for " + image.filename().string());
    }
    layout.cases.push_back({case_stem(image), image, label});
  }
  return layout;
}

struct CaseScan {
  VolumeGeometry geometry;
  std::vector<std::int64_t> counts;  // aligned with index organs
  std::exception_ptr error;
};

void scan_case(const CaseEntry& entry, const std::vector<std::int32_t>& organs, CaseScan& out) {
  try {
    const LabelVolume labels = load_labels(entry.label);
    out.geometry = labels.geometry;
    std::int32_t max_organ = 0;
    for (const auto organ : organs) max_organ = std::max(max_organ, organ);
    std::vector<std::int64_t> by_value(static_cast<std::size_t>(max_organ) + 1, 0);
    for (Eigen::Index i = 0; i < labels.voxels.size(); ++i) {
      const std::int32_t v = labels.voxels[i];
      if (v > 0 && v <= max_organ) ++by_value[static_cast<std::size_t>(v)];
    }
    out.counts.resize(organs.size());
    for (std::size_t j = 0; j < organs.size(); ++j) {
      out.counts[j] = by_value[static_cast<std::size_t>(organs[j])];
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

std::int64_t DatasetIndex::case_index(const std::string& id) const {
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].id == id) return static_cast<std::int64_t>(i);
  }
  return -1;
}

std::int64_t DatasetIndex::organ_index(std::int32_t organ) const {
  for (std::size_t j = 0; j < organs.size(); ++j) {
    if (organs[j] == organ) return static_cast<std::int64_t>(j);
  }
  return -1;
}

BigUInt combination_count(std::int64_t n_cases, std::int64_t n_organs) {
  if (n_cases < 1 || n_organs < 0) {
    throw Error(ErrorCode::InvalidArgument, "combination_count needs n_cases >= 1 and n_organs >= 0");
  }
  return pow_biguint(static_cast<std::uint32_t>(n_cases), static_cast<std::uint32_t>(n_organs) + 1);
}

DatasetIndex build_index(const std::filesystem::path& root_or_manifest,
                         const std::map<std::int32_t, std::string>& organ_table, int workers) {
  DatasetLayout layout;
  if (std::filesystem::is_regular_file(root_or_manifest)) {
    layout = read_manifest(root_or_manifest);
  } else if (std::filesystem::is_directory(root_or_manifest)) {
    const auto manifest = root_or_manifest / "manifest.json";
    layout = std::filesystem::is_regular_file(manifest) ? read_manifest(manifest)
                                                        : discover_dataset(root_or_manifest);
  } else {
    throw Error(ErrorCode::ConfigError, "dataset path does not exist: " + root_or_manifest.string());
  }
  if (layout.cases.empty()) {
    throw Error(ErrorCode::NoCasesFound, "no cases under " + root_or_manifest.string());
  }

  DatasetIndex index;
  if (!organ_table.empty()) {
    index.organ_names = organ_table;
  } else if (!layout.organs.empty()) {
    index.organ_names = layout.organs;
  } else {
    // fall back to the organs annotated in the first case
    index.organ_names = load_labels(layout.cases.front().label).label_table;
  }
  if (index.organ_names.empty()) {
    throw Error(ErrorCode::ConfigError, "no target organs (first case has no labels and no table given)");
  }
  for (const auto& [organ, name] : index.organ_names) {
    if (organ <= 0) throw Error(ErrorCode::ConfigError, "organ ids must be positive");
    index.organs.push_back(organ);
  }

  std::vector<CaseScan> scans(layout.cases.size());
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(layout.cases.size())));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < layout.cases.size(); ++i) scan_case(layout.cases[i], index.organs, scans[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= layout.cases.size()) return;
          scan_case(layout.cases[i], index.organs, scans[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  if (scans.front().error) std::rethrow_exception(scans.front().error);
  index.geometry = scans.front().geometry;

  std::vector<std::vector<std::int64_t>> kept_counts;
  for (std::size_t i = 0; i < layout.cases.size(); ++i) {
    if (scans[i].error) {
      try {
        std::rethrow_exception(scans[i].error);
      } catch (const std::exception& e) {
        throw Error(ErrorCode::IoFailure, layout.cases[i].id + ": " + e.what());
      }
    }
    if (!geometry_compatible(scans[i].geometry, index.geometry)) {
      index.rejected.push_back(layout.cases[i].id + ": grid differs from first case " +
                               layout.cases.front().id);
      continue;
    }
    index.cases.push_back(layout.cases[i]);
    kept_counts.push_back(std::move(scans[i].counts));
  }

  index.counts.resize(static_cast<Eigen::Index>(index.cases.size()),
                      static_cast<Eigen::Index>(index.organs.size()));
  for (std::size_t i = 0; i < kept_counts.size(); ++i) {
    for (std::size_t j = 0; j < index.organs.size(); ++j) {
      index.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kept_counts[i][j];
    }
  }
  return index;
}

void for_each_plan(const DatasetIndex& index, double threshold,
                   const std::function<void(const AugmentationPlan&)>& emit) {
  if (threshold < 0.0) throw Error(ErrorCode::InvalidArgument, "threshold must be non-negative");
  const auto n_cases = static_cast<Eigen::Index>(index.cases.size());
  const auto n_organs = static_cast<Eigen::Index>(index.organs.size());

  std::vector<std::vector<Eigen::Index>> donors(static_cast<std::size_t>(n_organs));
  for (Eigen::Index bi = 0; bi < n_cases; ++bi) {
    bool eligible = true;
    for (Eigen::Index j = 0; j < n_organs && eligible; ++j) {
      eligible = index.counts(bi, j) > 0;
    }
    if (!eligible) continue;  // a zero-count organ cannot normalize the ratio

    bool any_empty = false;
    for (Eigen::Index j = 0; j < n_organs; ++j) {
      auto& list = donors[static_cast<std::size_t>(j)];
      list.clear();
      const std::int64_t base_count = index.counts(bi, j);
      for (Eigen::Index ci = 0; ci < n_cases; ++ci) {
        const std::int64_t donor_count = index.counts(ci, j);
        if (donor_count <= 0) continue;
        if (size_ratio_counts(donor_count, base_count) < threshold) list.push_back(ci);
      }
      if (list.empty()) any_empty = true;
    }
    if (any_empty) continue;

    std::vector<std::size_t> pick(static_cast<std::size_t>(n_organs), 0);
    for (;;) {
      bool identity = true;
      for (Eigen::Index j = 0; j < n_organs && identity; ++j) {
        identity = donors[static_cast<std::size_t>(j)][pick[static_cast<std::size_t>(j)]] == bi;
      }
      if (!identity) {
        AugmentationPlan plan;
        plan.background = index.cases[static_cast<std::size_t>(bi)].id;
        for (Eigen::Index j = 0; j < n_organs; ++j) {
          const Eigen::Index ci = donors[static_cast<std::size_t>(j)][pick[static_cast<std::size_t>(j)]];
          plan.donors[index.organs[static_cast<std::size_t>(j)]] =
              index.cases[static_cast<std::size_t>(ci)].id;
        }
        emit(plan);
      }
      // odometer: last organ advances fastest, so donor tuples stream in
      // (organ order, case order) lexicographic order
      Eigen::Index j = n_organs - 1;
      for (; j >= 0; --j) {
        auto& p = pick[static_cast<std::size_t>(j)];
        if (++p < donors[static_cast<std::size_t>(j)].size()) break;
        p = 0;
      }
      if (j < 0) break;
    }
  }
}

std::vector<AugmentationPlan> enumerate_plans(const DatasetIndex& index, double threshold) {
  std::vector<AugmentationPlan> plans;
  for_each_plan(index, threshold, [&](const AugmentationPlan& plan) { plans.push_back(plan); });
  return plans;
}

std::vector<AugmentationPlan> sample_plans(const std::vector<AugmentationPlan>& plans,
                                           std::int64_t k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "sample size must be at least 1");
  if (k >= static_cast<std::int64_t>(plans.size())) return plans;

  std::vector<std::size_t> order(plans.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::vector<AugmentationPlan> sample;
  sample.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(i, static_cast<std::int64_t>(order.size()) - 1));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
    sample.push_back(plans[order[static_cast<std::size_t>(i)]]);
  }
  return sample;
}

void write_plan_jsonl(std::ostream& out, const AugmentationPlan& plan) {
  ordered_json j;
  j["background"] = plan.background;
  ordered_json donors = ordered_json::object();
  for (const auto& [organ, donor] : plan.donors) donors[std::to_string(organ)] = donor;
  j["donors"] = std::move(donors);
  out << j.dump() << '\n';
}

std::vector<AugmentationPlan> read_plans_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open plan file " + path.string());
  std::vector<AugmentationPlan> plans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    AugmentationPlan plan;
    plan.background = j.at("background").get<std::string>();
    for (const auto& [key, value] : j.at("donors").items()) {
      plan.donors[std::stoi(key)] = value.get<std::string>();
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace anatoforge
