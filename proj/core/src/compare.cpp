#include "igtrack/compare.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "igtrack/errors.hpp"

namespace igtrack {

std::vector<double> CompareResult::values(TrackerMode mode, const std::string& metric) const {
    std::vector<double> out;
    for (const CompareRun& r : runs) {
        if (r.mode != mode) continue;
        for (const auto& [name, v] : metric_values(r.report)) {
            if (name == metric) out.push_back(v);
        }
    }
    return out;
}

double improvement(const std::string& metric, double base, double proposed) {
    const double gain = (metric == "robustness" || metric == "failures_per_100") ? base - proposed : proposed - base;
    if (base == 0) return gain == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gain);
    return gain / std::abs(base);
}

CompareResult run_compare(const Dataset& dataset, const CompareConfig& config,
                          const std::function<void(const std::string&)>& progress) {
    if (config.seeds.empty()) throw ConfigError("compare: at least one seed is required");
    const DatasetSplit split = split_dataset(dataset, config.holdout);
    CompareResult result;
    for (std::uint64_t seed : config.seeds) {
        for (TrackerMode mode : {TrackerMode::kBase, TrackerMode::kIg}) {
            TrainConfig tc = config.train;
            tc.mode = mode;
            tc.seed = seed;
            if (progress) progress("training " + to_string(mode) + " seed=" + std::to_string(seed));
            const auto start = std::chrono::steady_clock::now();
            TrainResult trained = train(split.train, tc);
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            const Model model = Model::from_params(std::move(trained.params), tc.net);
            const TrackerConfig& tracker = mode == TrackerMode::kBase ? config.base_tracker : config.ig_tracker;
            if (progress) progress("evaluating " + to_string(mode) + " seed=" + std::to_string(seed));
            result.runs.push_back({seed, mode, evaluate_tracker(model, split.held_out, tracker), model.params,
                                   elapsed.count()});
        }
    }
    return result;
}

namespace {

std::string cell(const std::vector<double>& v) {
    char buf[48];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() == 1) {
        std::snprintf(buf, sizeof buf, "%.4f", mean);
    } else {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        std::snprintf(buf, sizeof buf, "%.4f ±%.4f", mean, (*hi - *lo) / 2);
    }
    return buf;
}

}  // namespace

void write_compare_table(std::ostream& os, const CompareResult& result) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %-18s %-18s %-18s\n", "metric", "base", "proposed", "improvement");
    os << line;
    for (const auto& [metric, unused] : metric_values(EvalReport{})) {
        (void)unused;
        const std::vector<double> b = result.values(TrackerMode::kBase, metric);
        const std::vector<double> p = result.values(TrackerMode::kIg, metric);
        if (b.empty() || b.size() != p.size()) throw PreconditionError("compare table: unpaired runs");
        std::vector<double> d(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) d[i] = improvement(metric, b[i], p[i]);
        std::snprintf(line, sizeof line, "%-16s %-18s %-18s %-18s\n", metric.c_str(), cell(b).c_str(),
                      cell(p).c_str(), cell(d).c_str());
        os << line;
    }
}

}  // namespace igtrack
