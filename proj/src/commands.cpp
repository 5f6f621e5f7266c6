#include "anatoforge/commands.hpp"

#include "anatoforge/log.hpp"
#include "anatoforge/metrics.hpp"
#include "anatoforge/nifti.hpp"
#include "anatoforge/phantom.hpp"
#include "anatoforge/transplant.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

namespace anatoforge {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double parse_threshold(const json& value) {
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "inf" || s == "unbounded") return std::numeric_limits<double>::infinity();
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad threshold value: " + s);
    }
  }
  return value.get<double>();
}

std::string stem_of(const std::filesystem::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".gz", ".nii"}) {
    const std::string s(suffix);
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      name.erase(name.size() - s.size());
    }
  }
  return name;
}

std::map<std::string, std::filesystem::path> scan_label_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::ConfigError, "not a directory: " + dir.string());
  }
  std::map<std::string, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".nii") || name.ends_with(".nii.gz")) {
      files[stem_of(entry.path())] = entry.path();
    }
  }
  return files;
}

template <typename Fn>
void run_pool(std::int64_t n, int workers, Fn&& fn) {
  const int n_workers = static_cast<int>(std::max<std::int64_t>(
      1, std::min<std::int64_t>(workers, n)));
  if (n_workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

DatasetIndex build_configured_index(const RunConfig& config) {
  if (config.dataset.empty()) {
    throw Error(ErrorCode::ConfigError, "no dataset configured (set manifest or dataset root)");
  }
  DatasetIndex index = build_index(config.dataset, config.organs, config.workers);
  for (const auto& reject : index.rejected) log_warn("rejected case " + reject);
  return index;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  RunConfig config;
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& s) {
    std::filesystem::path p(s);
    return p.is_absolute() ? p : base / p;
  };
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "manifest" || key == "dataset" || key == "dataset_root") {
        config.dataset = resolve(value.get<std::string>());
      } else if (key == "organs") {
        for (const auto& [id, name] : value.items()) {
          config.organs[std::stoi(id)] = name.get<std::string>();
        }
      } else if (key == "threshold") {
        config.threshold = parse_threshold(value);
      } else if (key == "count") {
        config.count = value.get<std::int64_t>();
      } else if (key == "seed") {
        config.seed = value.get<std::uint64_t>();
      } else if (key == "window") {
        config.window = value.get<int>();
      } else if (key == "inpaint") {
        config.inpaint = value.get<bool>();
      } else if (key == "inpaint_tolerance") {
        config.inpaint_cfg.tolerance = value.get<double>();
      } else if (key == "inpaint_max_iterations") {
        config.inpaint_cfg.max_iterations = value.get<int>();
      } else if (key == "out") {
        config.out = resolve(value.get<std::string>());
      } else if (key == "workers") {
        config.workers = value.get<int>();
      } else if (key == "plans") {
        config.plans = resolve(value.get<std::string>());
      } else {
        throw Error(ErrorCode::ConfigError, path.string() + ": unknown config key \"" + key + "\"");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, path.string() + ": key \"" + key + "\": " + e.what());
    }
  }
  if (config.threshold < 0.0 || config.count < 1 || config.workers < 1 || config.window < 0) {
    throw Error(ErrorCode::ConfigError,
                "config requires threshold >= 0, count >= 1, workers >= 1, window >= 0");
  }
  return config;
}

int cmd_plan(const RunConfig& config) {
  const DatasetIndex index = build_configured_index(config);

  std::filesystem::path plan_path = config.out.empty() ? "plans.jsonl" : config.out;
  if (std::filesystem::is_directory(plan_path)) plan_path /= "plans.jsonl";
  if (!plan_path.parent_path().empty()) {
    std::filesystem::create_directories(plan_path.parent_path());
  }
  std::ofstream out(plan_path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + plan_path.string());

  std::int64_t surviving = 0;
  std::map<std::int32_t, std::map<std::string, std::int64_t>> donor_histogram;
  for_each_plan(index, config.threshold, [&](const AugmentationPlan& plan) {
    write_plan_jsonl(out, plan);
    ++surviving;
    for (const auto& [organ, donor] : plan.donors) ++donor_histogram[organ][donor];
  });
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + plan_path.string());

  const BigUInt total = combination_count(static_cast<std::int64_t>(index.cases.size()),
                                          static_cast<std::int64_t>(index.organs.size()));
  std::cout << "cases: " << index.cases.size() << " (rejected " << index.rejected.size() << ")\n"
            << "target organs: " << index.organs.size() << "\n"
            << "total combinations: " << total.to_string() << "\n"
            << "surviving plans (r_s < "
            << (std::isinf(config.threshold) ? std::string("inf") : std::to_string(config.threshold))
            << "): " << surviving << "\n";
  for (const auto& [organ, hist] : donor_histogram) {
    std::cout << "organ " << organ << " donors:";
    for (const auto& [donor, uses] : hist) std::cout << ' ' << donor << 'x' << uses;
    std::cout << "\n";
  }
  std::cout << "plans written to " << plan_path.string() << "\n";

  ordered_json summary;
  summary["cases"] = index.cases.size();
  summary["rejected"] = index.rejected;
  summary["organs"] = index.organs.size();
  summary["total_combinations"] = total.to_string();
  summary["surviving_plans"] = surviving;
  ordered_json hist = ordered_json::object();
  for (const auto& [organ, per_donor] : donor_histogram) {
    ordered_json h = ordered_json::object();
    for (const auto& [donor, uses] : per_donor) h[donor] = uses;
    hist[std::to_string(organ)] = std::move(h);
  }
  summary["donor_histogram"] = std::move(hist);
  std::filesystem::path summary_path = plan_path;
  summary_path.replace_extension(".summary.json");
  std::ofstream sf(summary_path);
  sf << summary.dump(2) << '\n';
  return 0;
}

int cmd_augment(const RunConfig& config) {
  if (!config.seed.has_value()) {
    throw Error(ErrorCode::ConfigError, "augment requires a seed (reproducibility is the contract)");
  }
  const DatasetIndex index = build_configured_index(config);

  std::vector<AugmentationPlan> plans;
  if (!config.plans.empty()) {
    plans = read_plans_jsonl(config.plans);
  } else {
    plans = enumerate_plans(index, config.threshold);
  }
  if (plans.empty()) {
    log_warn("no plans survive the filter; nothing to do");
    std::cout << "augmented 0 pairs (0 failures)\n";
    return 0;
  }
  if (config.count > static_cast<std::int64_t>(plans.size())) {
    log_warn("requested " + std::to_string(config.count) + " outputs but only " +
             std::to_string(plans.size()) + " plans survive; realizing all of them");
  }
  const std::vector<AugmentationPlan> sampled = sample_plans(plans, config.count, *config.seed);

  const std::filesystem::path out_dir = config.out.empty() ? "augmented" : config.out;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());

  const ShiftOffset window{config.window, config.window, config.window};
  VolumeStore store;
  std::vector<std::string> failures(sampled.size());
  std::atomic<std::int64_t> failed{0};

  run_pool(static_cast<std::int64_t>(sampled.size()), config.workers, [&](std::int64_t i) {
    const AugmentationPlan& plan = sampled[static_cast<std::size_t>(i)];
    const std::string stem = output_stem(plan, index.organs);
    try {
      TransplantResult result = transplant(plan, index, window, store);
      const std::int64_t hole_count = popcount(result.holes);
      FillStats fill_stats;
      if (config.inpaint && hole_count > 0) {
        const IntensityVolume filled =
            diffusion_fill(result.image, result.holes, config.inpaint_cfg, &fill_stats);
        result.image = blend(filled, result.image, result.holes);
      }
      write_volume(result.image, out_dir / (stem + ".nii.gz"));
      write_volume(result.labels, out_dir / (stem + "_seg.nii.gz"));

      ordered_json sidecar;
      sidecar["output"] = stem;
      sidecar["background"] = plan.background;
      ordered_json donors = ordered_json::object();
      ordered_json shifts = ordered_json::object();
      for (const std::int32_t organ : index.organs) {
        donors[std::to_string(organ)] = plan.donors.at(organ);
        const OrganShift& s = result.shifts.at(organ);
        shifts[std::to_string(organ)] = {
            {"offset", {s.shift.dx, s.shift.dy, s.shift.dz}},
            {"overlap", s.overlap},
            {"size_ratio", s.size_ratio},
        };
      }
      sidecar["donors"] = std::move(donors);
      sidecar["shifts"] = std::move(shifts);
      sidecar["collision_voxels"] = result.collision_voxels;
      sidecar["hole_voxels"] = hole_count;
      sidecar["inpaint"] = {{"enabled", config.inpaint},
                            {"iterations", fill_stats.iterations},
                            {"final_max_update", fill_stats.final_max_update}};
      std::ofstream sf(out_dir / (stem + ".json"));
      sf << sidecar.dump(2) << '\n';
      if (!sf) throw Error(ErrorCode::IoFailure, "sidecar write failed for " + stem);
      log_debug("wrote " + stem);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = stem + ": " + e.what();
      failed.fetch_add(1);
    }
  });

  for (const auto& f : failures) {
    if (!f.empty()) log_error("plan failed: " + f);
  }
  const std::int64_t n_failed = failed.load();
  std::cout << "augmented " << (static_cast<std::int64_t>(sampled.size()) - n_failed) << " pairs ("
            << n_failed << " failures) into " << out_dir.string() << "\n";
  return n_failed == 0 ? 0 : 1;
}

int cmd_eval(const RunConfig& config, const std::filesystem::path& pred_dir,
             const std::filesystem::path& gt_dir) {
  const auto pred_files = scan_label_dir(pred_dir);
  const auto gt_files = scan_label_dir(gt_dir);

  std::vector<std::string> unmatched;
  for (const auto& [stem, path] : pred_files) {
    if (gt_files.find(stem) == gt_files.end()) unmatched.push_back("pred-only: " + stem);
  }
  for (const auto& [stem, path] : gt_files) {
    if (pred_files.find(stem) == pred_files.end()) unmatched.push_back("gt-only: " + stem);
  }
  if (!unmatched.empty()) {
    std::string msg = "case sets differ:";
    for (const auto& u : unmatched) msg += " " + u;
    throw Error(ErrorCode::ConfigError, msg);
  }
  if (pred_files.empty()) throw Error(ErrorCode::NoCasesFound, "no label files in " + pred_dir.string());

  std::map<std::int32_t, std::string> organ_names = config.organs;
  if (organ_names.empty()) {
    organ_names = load_labels(gt_files.begin()->second).label_table;
    if (organ_names.empty()) {
      throw Error(ErrorCode::ConfigError, "cannot derive organs: first ground-truth case is empty");
    }
  }
  std::vector<std::int32_t> organs;
  for (const auto& [organ, name] : organ_names) organs.push_back(organ);

  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
  for (const auto& [stem, path] : pred_files) pairs.emplace_back(path, gt_files.at(stem));

  const DatasetReport report = evaluate_dataset(pairs, organs, organ_names);

  const std::filesystem::path out_dir = config.out.empty() ? "." : config.out;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream csv(out_dir / "dice_report.csv");
  write_report_csv(report, csv);
  if (!csv) throw Error(ErrorCode::IoFailure, "cannot write dice_report.csv");
  std::ofstream js(out_dir / "dice_report.json");
  write_report_json(report, js);
  if (!js) throw Error(ErrorCode::IoFailure, "cannot write dice_report.json");

  std::cout << "evaluated " << report.cases.size() << " cases, overall mean dice "
            << report.overall_mean << "\n";
  return 0;
}

int cmd_phantom(const RunConfig& config, const std::filesystem::path& spec_path) {
  const PhantomSpec spec = load_phantom_spec(spec_path);
  const std::filesystem::path out_dir = config.out.empty() ? "phantom" : config.out;
  const PhantomTruth truth = generate(spec, out_dir, config.workers);
  std::cout << "generated " << truth.cases.size() << " cases with " << spec.organs.size()
            << " organs into " << out_dir.string() << "\n";
  return 0;
}

}  // namespace anatoforge
