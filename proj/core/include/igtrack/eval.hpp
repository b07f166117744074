#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "igtrack/dataset.hpp"
#include "igtrack/geometry.hpp"
#include "igtrack/tracker.hpp"

namespace igtrack {

/// Frames between a failure and the re-initialization.
inline constexpr std::size_t kReinitDelay = 5;
/// Frames after a re-initialization left out of accuracy.
inline constexpr std::size_t kBurnIn = 10;

/// Per-frame overlaps of one tracked segment (init frame excluded).
struct OverlapCurve {
    std::vector<double> overlaps;
    bool failed = false;
};

struct VotRun {
    std::size_t frames = 0;
    std::vector<std::size_t> init_frames;
    std::vector<std::size_t> failure_frames;
    std::vector<double> accuracy_overlaps;  // overlaps that count toward accuracy
    std::vector<OverlapCurve> segments;

    std::size_t failures() const { return failure_frames.size(); }
};

/// Supervised protocol: a zero-overlap frame is a failure, the tracker is
/// re-initialized on ground truth kReinitDelay frames later, and the kBurnIn
/// frames after each re-initialization do not count toward accuracy.
/// `init(frame)` starts tracking on gt[frame]; `update(frame)` returns a box.
VotRun vot_protocol(const std::vector<Box>& gt, const std::function<void(std::size_t)>& init,
                    const std::function<Box(std::size_t)>& update);

VotRun vot_run(SequenceTracker& tracker, const SequenceRecord& sequence);

/// Replays fixed predictions through the protocol; after a failure the
/// predictions resume at the re-initialization frame.
VotRun vot_offline(const std::vector<Box>& pred, const std::vector<Box>& gt);

/// Mean of the counted overlaps over all runs; 0 when none were counted.
double accuracy(const std::vector<VotRun>& runs);
/// Failures per sequence.
double robustness(const std::vector<VotRun>& runs);
double failures_per_100(std::size_t failures, std::size_t frames);
double failures_per_100(const std::vector<VotRun>& runs);

/// Expected-average-overlap approximation: for each length L in [lo, hi], the
/// mean over segments of the average overlap of the first L frames, with
/// failed segments padded by zeros up to L. The result averages over L.
double eao_approx(const std::vector<OverlapCurve>& curves, std::size_t lo, std::size_t hi);
/// [lo, hi] from the 15% and 85% nearest-rank quantiles of segment lengths.
std::pair<std::size_t, std::size_t> eao_interval(const std::vector<OverlapCurve>& curves);
double eao_approx(const std::vector<OverlapCurve>& curves);

struct GotMetrics {
    double ao = 0;
    double sr50 = 0;
    double sr75 = 0;
    std::size_t frames = 0;
};

/// One-pass metrics, frame 0 excluded. SR_t counts overlaps strictly above t.
GotMetrics got_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt);
/// Same, over overlaps that already exclude the initialization frame.
GotMetrics got_metrics_from_overlaps(const std::vector<double>& overlaps);

/// Fraction of frames (excluding frame 0) whose center error is below `threshold` px.
double precision_center(const std::vector<Box>& pred, const std::vector<Box>& gt, double threshold = 20.0);

struct EvalReport {
    std::size_t sequences = 0;
    std::size_t frames = 0;
    double ao = 0;
    double sr50 = 0;
    double sr75 = 0;
    double accuracy = 0;
    double robustness = 0;  // failures per sequence
    std::size_t failures = 0;
    double failures_per_100 = 0;
    double eao_approx = 0;
    double precision20 = 0;
};

/// Named metric accessors in report order; larger is better except the two failure rates.
std::vector<std::pair<std::string, double>> metric_values(const EvalReport& report);

/// Aggregates one-pass predictions and supervised runs over a set of sequences.
EvalReport make_report(const std::vector<std::vector<Box>>& one_pass_pred, const std::vector<std::vector<Box>>& gt,
                       const std::vector<VotRun>& runs);

/// One-pass tracking plus the supervised protocol on every sequence.
EvalReport evaluate_tracker(const Model& model, const Dataset& sequences, const TrackerConfig& config);

void write_report_table(std::ostream& os, const EvalReport& report);
void write_report_kv(std::ostream& os, const EvalReport& report);

}  // namespace igtrack
