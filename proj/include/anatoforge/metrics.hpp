// Dice evaluation of predicted vs ground-truth label volumes, per organ and
// aggregated over a dataset. Case means are macro-averaged over the organs
// present in ground truth; dataset means macro-average the case means.
#pragma once

#include "anatoforge/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace anatoforge {

// 2|a n b| / (|a| + |b|); 1.0 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& gt);

struct DiceReport {
  std::string case_id;
  // nullopt marks an organ absent from ground truth (excluded from the mean)
  std::map<std::int32_t, std::optional<double>> per_organ;
  double mean{0.0};
};

DiceReport evaluate_case(const LabelVolume& pred, const LabelVolume& gt,
                         const std::vector<std::int32_t>& organs,
                         const std::string& case_id = "");

struct DatasetReport {
  std::vector<std::int32_t> organs;
  std::map<std::int32_t, std::string> organ_names;
  std::vector<DiceReport> cases;
  std::map<std::int32_t, std::optional<double>> organ_means;  // over cases with the organ
  double overall_mean{0.0};                                   // mean of case means
};

DatasetReport evaluate_dataset(
    const std::vector<std::pair<std::filesystem::path, std::filesystem::path>>& pred_gt_pairs,
    const std::vector<std::int32_t>& organs, const std::map<std::int32_t, std::string>& organ_names);

// header: case,<organ names...>,mean ; one row per case plus a final
// "overall" row with the aggregate columns. Absent organs print "absent".
void write_report_csv(const DatasetReport& report, std::ostream& out);
void write_report_json(const DatasetReport& report, std::ostream& out);

}  // namespace anatoforge
