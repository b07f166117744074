#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "igtrack/eval.hpp"
#include "igtrack/train.hpp"

namespace igtrack {

struct CompareConfig {
    std::vector<std::uint64_t> seeds{1};
    std::size_t holdout = 10;
    TrainConfig train;  // mode is overridden per run
    TrackerConfig base_tracker = TrackerConfig::defaults(TrackerMode::kBase);
    TrackerConfig ig_tracker = TrackerConfig::defaults(TrackerMode::kIg);
};

struct CompareRun {
    std::uint64_t seed = 0;
    TrackerMode mode = TrackerMode::kBase;
    EvalReport report;
    ParamStore params;
    double train_seconds = 0;
};

struct CompareResult {
    std::vector<CompareRun> runs;

    /// Per-seed metric values for one mode, in run order.
    std::vector<double> values(TrackerMode mode, const std::string& metric) const;
};

/// Relative improvement (proposed - base) / base; for robustness and
/// failures_per_100 (lower is better) the relative reduction
/// (base - proposed) / base.
double improvement(const std::string& metric, double base, double proposed);

/// Trains base and IG models per seed on the training split and evaluates
/// each on the held-out split with its own tracker config.
CompareResult run_compare(const Dataset& dataset, const CompareConfig& config,
                          const std::function<void(const std::string&)>& progress = {});

/// Rows are metrics; columns base, proposed, improvement. With several seeds
/// cells show "mean ±half-range".
void write_compare_table(std::ostream& os, const CompareResult& result);

}  // namespace igtrack
