// Plan enumeration: index a dataset's organ voxel counts, then stream every
// background/donor combination whose per-organ size ratio clears the filter.
#pragma once

#include "anatoforge/bigint.hpp"
#include "anatoforge/types.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace anatoforge {

struct CaseEntry {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path label;
};

struct DatasetIndex {
  std::vector<CaseEntry> cases;
  std::vector<std::int32_t> organs;  // target organs, fixed order
  std::map<std::int32_t, std::string> organ_names;
  // counts(i, j): voxels of organs[j] in cases[i]; 0 when the case lacks the organ
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  VolumeGeometry geometry;  // grid shared by every accepted case
  std::vector<std::string> rejected;  // "case-id: reason" for geometry rejects

  std::int64_t case_index(const std::string& id) const;  // -1 when absent
  std::int64_t organ_index(std::int32_t organ) const;    // -1 when absent
};

// One background case plus a donor case per target organ.
struct AugmentationPlan {
  std::string background;
  std::map<std::int32_t, std::string> donors;

  friend bool operator==(const AugmentationPlan&, const AugmentationPlan&) = default;
};

// n_cases^(n_organs+1), exact at any size.
BigUInt combination_count(std::int64_t n_cases, std::int64_t n_organs);

// Accepts either a manifest JSON file or a dataset root directory with
// images/ and labels/ subdirectories sharing file names. An empty organ
// table derives the targets from the first case's labels. Cases whose grid
// disagrees with the first case are rejected and reported, not indexed.
DatasetIndex build_index(const std::filesystem::path& root_or_manifest,
                         const std::map<std::int32_t, std::string>& organ_table,
                         int workers = 1);

// Streams every surviving plan in deterministic order: backgrounds in index
// order, donor tuples lexicographic by (organ order, case order). A case
// with a zero count for any target organ cannot serve as background, and
// cannot donate an organ it lacks. The identity plan (every donor equal to
// the background) is skipped. The filter is strict: r_s < threshold.
void for_each_plan(const DatasetIndex& index, double threshold,
                   const std::function<void(const AugmentationPlan&)>& emit);

std::vector<AugmentationPlan> enumerate_plans(const DatasetIndex& index, double threshold);

// Seeded sample without replacement; the full list (in enumeration order)
// when k covers it.
std::vector<AugmentationPlan> sample_plans(const std::vector<AugmentationPlan>& plans,
                                           std::int64_t k, std::uint64_t seed);

// JSON lines, one plan per line: {"background": "...", "donors": {"1": "...", ...}}
void write_plan_jsonl(std::ostream& out, const AugmentationPlan& plan);
std::vector<AugmentationPlan> read_plans_jsonl(const std::filesystem::path& path);

}  // namespace anatoforge
