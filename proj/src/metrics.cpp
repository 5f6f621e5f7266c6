#include "anatoforge/metrics.hpp"

#include "anatoforge/nifti.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace anatoforge {
namespace {

// Summing in sorted order makes aggregate means independent of case order.
double mean_sorted(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

BinaryMask value_mask(const LabelVolume& labels, std::int32_t organ) {
  BinaryMask mask;
  mask.geometry = labels.geometry;
  mask.voxels = (labels.voxels == organ);
  return mask;
}

std::string case_id_from(const std::filesystem::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".gz", ".nii"}) {
    const std::string s(suffix);
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      name.erase(name.size() - s.size());
    }
  }
  return name;
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  if (!geometry_compatible(pred.geometry, gt.geometry)) {
    throw Error(ErrorCode::GeometryMismatch, "dice masks on different grids");
  }
  const std::int64_t p = pred.voxels.count();
  const std::int64_t g = gt.voxels.count();
  if (p + g == 0) return 1.0;
  const std::int64_t inter = (pred.voxels && gt.voxels).count();
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

DiceReport evaluate_case(const LabelVolume& pred, const LabelVolume& gt,
                         const std::vector<std::int32_t>& organs, const std::string& case_id) {
  if (!geometry_compatible(pred.geometry, gt.geometry)) {
    throw Error(ErrorCode::GeometryMismatch, "evaluate_case volumes on different grids");
  }
  DiceReport report;
  report.case_id = case_id;
  std::vector<double> present;
  for (const std::int32_t organ : organs) {
    const BinaryMask gt_mask = value_mask(gt, organ);
    if (gt_mask.voxels.count() == 0) {
      report.per_organ[organ] = std::nullopt;
      continue;
    }
    const double score = dice(value_mask(pred, organ), gt_mask);
    report.per_organ[organ] = score;
    present.push_back(score);
  }
  if (present.empty()) {
    // degenerate case: no target organ annotated; score the target-label
    // unions against each other (1.0 iff the prediction is also empty)
    BinaryMask pu = make_mask(pred.geometry), gu = make_mask(gt.geometry);
    for (const std::int32_t organ : organs) {
      pu.voxels = pu.voxels || (pred.voxels == organ);
      gu.voxels = gu.voxels || (gt.voxels == organ);
    }
    report.mean = dice(pu, gu);
  } else {
    report.mean = mean_sorted(present);
  }
  return report;
}

DatasetReport evaluate_dataset(
    const std::vector<std::pair<std::filesystem::path, std::filesystem::path>>& pred_gt_pairs,
    const std::vector<std::int32_t>& organs, const std::map<std::int32_t, std::string>& organ_names) {
  DatasetReport report;
  report.organs = organs;
  report.organ_names = organ_names;
  for (const auto& [pred_path, gt_path] : pred_gt_pairs) {
    LabelVolume pred, gt;
    try {
      pred = load_labels(pred_path);
      gt = load_labels(gt_path);
    } catch (const Error& e) {
      throw Error(e.code(), "case " + case_id_from(pred_path) + ": " + e.what());
    }
    report.cases.push_back(evaluate_case(pred, gt, organs, case_id_from(pred_path)));
  }

  std::vector<double> case_means;
  for (const std::int32_t organ : organs) {
    std::vector<double> values;
    for (const auto& c : report.cases) {
      const auto it = c.per_organ.find(organ);
      if (it != c.per_organ.end() && it->second.has_value()) values.push_back(*it->second);
    }
    report.organ_means[organ] = values.empty() ? std::optional<double>{} : mean_sorted(values);
  }
  for (const auto& c : report.cases) case_means.push_back(c.mean);
  report.overall_mean = mean_sorted(case_means);
  return report;
}

void write_report_csv(const DatasetReport& report, std::ostream& out) {
  out << "case";
  for (const std::int32_t organ : report.organs) {
    const auto it = report.organ_names.find(organ);
    out << ',' << (it != report.organ_names.end() ? it->second : "organ_" + std::to_string(organ));
  }
  out << ",mean\n";
  char buf[32];
  const auto cell = [&](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("absent");
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& c : report.cases) {
    out << c.case_id;
    for (const std::int32_t organ : report.organs) out << ',' << cell(c.per_organ.at(organ));
    out << ',' << cell(c.mean) << '\n';
  }
  out << "overall";
  for (const std::int32_t organ : report.organs) out << ',' << cell(report.organ_means.at(organ));
  out << ',' << cell(report.overall_mean) << '\n';
}

void write_report_json(const DatasetReport& report, std::ostream& out) {
  nlohmann::ordered_json j;
  j["aggregation"] = "macro: per-case mean over organs present in ground truth, then mean over cases";
  nlohmann::ordered_json organs = nlohmann::ordered_json::object();
  for (const std::int32_t organ : report.organs) {
    const auto it = report.organ_names.find(organ);
    organs[std::to_string(organ)] =
        it != report.organ_names.end() ? it->second : "organ_" + std::to_string(organ);
  }
  j["organs"] = std::move(organs);
  j["cases"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cases) {
    nlohmann::ordered_json jc;
    jc["case"] = c.case_id;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [organ, value] : c.per_organ) {
      if (value.has_value()) {
        per[std::to_string(organ)] = *value;
      } else {
        per[std::to_string(organ)] = nullptr;
      }
    }
    jc["dice"] = std::move(per);
    jc["mean"] = c.mean;
    j["cases"].push_back(std::move(jc));
  }
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (const auto& [organ, value] : report.organ_means) {
    if (value.has_value()) {
      means[std::to_string(organ)] = *value;
    } else {
      means[std::to_string(organ)] = nullptr;
    }
  }
  j["organ_means"] = std::move(means);
  j["overall_mean"] = report.overall_mean;
  out << j.dump(2) << '\n';
}

}  // namespace anatoforge
