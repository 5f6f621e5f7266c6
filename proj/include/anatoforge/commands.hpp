// Batch pipeline commands behind the CLI: plan, augment, eval, phantom.
// Every command is deterministic for a fixed config and seed; worker count
// never changes output bytes. Exit codes: 0 success, 1 partial failure,
// 2 configuration error.
#pragma once

#include "anatoforge/inpaint.hpp"
#include "anatoforge/maskops.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace anatoforge {

struct RunConfig {
  std::filesystem::path dataset;  // manifest file or dataset root directory
  std::map<std::int32_t, std::string> organs;  // empty: take from manifest/first case
  double threshold{0.02};
  std::int64_t count{500};
  std::optional<std::uint64_t> seed;
  int window{8};
  bool inpaint{true};
  InpaintConfig inpaint_cfg;
  std::filesystem::path out;
  int workers{1};
  std::filesystem::path plans;  // optional plan JSONL input for augment
};

// Parses the JSON config file; unknown keys are rejected so typos fail loudly.
RunConfig load_run_config(const std::filesystem::path& path);

int cmd_plan(const RunConfig& config);
int cmd_augment(const RunConfig& config);
int cmd_eval(const RunConfig& config, const std::filesystem::path& pred_dir,
             const std::filesystem::path& gt_dir);
int cmd_phantom(const RunConfig& config, const std::filesystem::path& spec_path);

}  // namespace anatoforge
