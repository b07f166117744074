#include "igtrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "igtrack/errors.hpp"

namespace igtrack {

VotRun vot_protocol(const std::vector<Box>& gt, const std::function<void(std::size_t)>& init,
                    const std::function<Box(std::size_t)>& update) {
    if (gt.empty()) throw PreconditionError("vot_protocol: empty ground truth");
    VotRun run;
    run.frames = gt.size();
    std::size_t start = 0;
    while (start < gt.size()) {
        init(start);
        run.init_frames.push_back(start);
        const bool reinit = start != 0;
        OverlapCurve curve;
        std::size_t next = gt.size();
        for (std::size_t t = start + 1; t < gt.size(); ++t) {
            const double o = iou(update(t), gt[t]);
            curve.overlaps.push_back(o);
            if (o <= 0) {
                curve.failed = true;
                run.failure_frames.push_back(t);
                next = t + kReinitDelay;
                break;
            }
            if (!reinit || t > start + kBurnIn) run.accuracy_overlaps.push_back(o);
        }
        if (!curve.overlaps.empty()) run.segments.push_back(std::move(curve));
        start = next;
    }
    return run;
}

VotRun vot_run(SequenceTracker& tracker, const SequenceRecord& sequence) {
    sequence.validate();
    return vot_protocol(
        sequence.gt, [&](std::size_t f) { tracker.init(sequence.frames[f], sequence.gt[f]); },
        [&](std::size_t f) { return tracker.update(sequence.frames[f]); });
}

VotRun vot_offline(const std::vector<Box>& pred, const std::vector<Box>& gt) {
    if (pred.size() != gt.size()) throw PreconditionError("vot_offline: prediction and ground-truth lengths differ");
    return vot_protocol(gt, [](std::size_t) {}, [&](std::size_t f) { return pred[f]; });
}

double accuracy(const std::vector<VotRun>& runs) {
    double sum = 0;
    std::size_t n = 0;
    for (const VotRun& r : runs) {
        for (double o : r.accuracy_overlaps) sum += o;
        n += r.accuracy_overlaps.size();
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double robustness(const std::vector<VotRun>& runs) {
    if (runs.empty()) return 0.0;
    std::size_t failures = 0;
    for (const VotRun& r : runs) failures += r.failures();
    return static_cast<double>(failures) / static_cast<double>(runs.size());
}

double failures_per_100(std::size_t failures, std::size_t frames) {
    if (frames == 0) throw PreconditionError("failures_per_100: no frames");
    return 100.0 * static_cast<double>(failures) / static_cast<double>(frames);
}

double failures_per_100(const std::vector<VotRun>& runs) {
    std::size_t failures = 0, frames = 0;
    for (const VotRun& r : runs) {
        failures += r.failures();
        frames += r.frames;
    }
    return frames == 0 ? 0.0 : failures_per_100(failures, frames);
}

double eao_approx(const std::vector<OverlapCurve>& curves, std::size_t lo, std::size_t hi) {
    if (curves.empty()) throw PreconditionError("eao_approx: no segments");
    if (lo < 1 || lo > hi) throw PreconditionError("eao_approx: need 1 <= lo <= hi");
    double total = 0;
    for (std::size_t len = lo; len <= hi; ++len) {
        double phi = 0;
        for (const OverlapCurve& c : curves) {
            const std::size_t avail = std::min(len, c.overlaps.size());
            double sum = 0;
            for (std::size_t t = 0; t < avail; ++t) sum += c.overlaps[t];
            const std::size_t denom = c.failed ? len : avail;
            phi += denom == 0 ? 0.0 : sum / static_cast<double>(denom);
        }
        total += phi / static_cast<double>(curves.size());
    }
    return total / static_cast<double>(hi - lo + 1);
}

std::pair<std::size_t, std::size_t> eao_interval(const std::vector<OverlapCurve>& curves) {
    if (curves.empty()) throw PreconditionError("eao_interval: no segments");
    std::vector<std::size_t> lengths;
    for (const OverlapCurve& c : curves) lengths.push_back(std::max<std::size_t>(c.overlaps.size(), 1));
    std::sort(lengths.begin(), lengths.end());
    const auto rank = [&](double q) {
        const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lengths.size())));
        return lengths[std::clamp<std::size_t>(k, 1, lengths.size()) - 1];
    };
    return {rank(0.15), rank(0.85)};
}

double eao_approx(const std::vector<OverlapCurve>& curves) {
    const auto [lo, hi] = eao_interval(curves);
    return eao_approx(curves, lo, hi);
}

GotMetrics got_metrics_from_overlaps(const std::vector<double>& overlaps) {
    GotMetrics m;
    m.frames = overlaps.size();
    if (overlaps.empty()) return m;
    std::size_t s50 = 0;
    std::size_t s75 = 0;
    for (double o : overlaps) {
        m.ao += o;
        s50 += o > 0.5;
        s75 += o > 0.75;
    }
    const auto n = static_cast<double>(overlaps.size());
    m.ao /= n;
    m.sr50 = static_cast<double>(s50) / n;
    m.sr75 = static_cast<double>(s75) / n;
    return m;
}

GotMetrics got_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt) {
    if (pred.size() != gt.size()) throw PreconditionError("got_metrics: prediction and ground-truth lengths differ");
    std::vector<double> overlaps;
    for (std::size_t i = 1; i < gt.size(); ++i) overlaps.push_back(iou(pred[i], gt[i]));
    return got_metrics_from_overlaps(overlaps);
}

double precision_center(const std::vector<Box>& pred, const std::vector<Box>& gt, double threshold) {
    if (pred.size() != gt.size()) throw PreconditionError("precision_center: lengths differ");
    if (gt.size() < 2) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 1; i < gt.size(); ++i) {
        hits += std::hypot(pred[i].cx - gt[i].cx, pred[i].cy - gt[i].cy) < threshold;
    }
    return static_cast<double>(hits) / static_cast<double>(gt.size() - 1);
}

std::vector<std::pair<std::string, double>> metric_values(const EvalReport& r) {
    return {{"ao", r.ao},
            {"sr50", r.sr50},
            {"sr75", r.sr75},
            {"accuracy", r.accuracy},
            {"robustness", r.robustness},
            {"failures_per_100", r.failures_per_100},
            {"eao_approx", r.eao_approx},
            {"precision20", r.precision20}};
}

EvalReport make_report(const std::vector<std::vector<Box>>& one_pass_pred, const std::vector<std::vector<Box>>& gt,
                       const std::vector<VotRun>& runs) {
    if (one_pass_pred.size() != gt.size()) throw PreconditionError("make_report: sequence counts differ");
    EvalReport r;
    r.sequences = gt.size();
    std::vector<double> overlaps;
    double prec_sum = 0;
    std::size_t prec_n = 0;
    for (std::size_t s = 0; s < gt.size(); ++s) {
        const auto& p = one_pass_pred[s];
        const auto& g = gt[s];
        if (p.size() != g.size()) throw PreconditionError("make_report: sequence lengths differ");
        for (std::size_t i = 1; i < g.size(); ++i) overlaps.push_back(iou(p[i], g[i]));
        if (g.size() > 1) {
            prec_sum += precision_center(p, g) * static_cast<double>(g.size() - 1);
            prec_n += g.size() - 1;
        }
    }
    const GotMetrics got = got_metrics_from_overlaps(overlaps);
    r.frames = got.frames;
    r.ao = got.ao;
    r.sr50 = got.sr50;
    r.sr75 = got.sr75;
    r.precision20 = prec_n == 0 ? 0.0 : prec_sum / static_cast<double>(prec_n);
    r.accuracy = accuracy(runs);
    r.robustness = robustness(runs);
    r.failures_per_100 = failures_per_100(runs);
    for (const VotRun& run : runs) r.failures += run.failures();
    std::vector<OverlapCurve> curves;
    for (const VotRun& run : runs) curves.insert(curves.end(), run.segments.begin(), run.segments.end());
    r.eao_approx = curves.empty() ? 0.0 : eao_approx(curves);
    return r;
}

EvalReport evaluate_tracker(const Model& model, const Dataset& sequences, const TrackerConfig& config) {
    std::vector<std::vector<Box>> preds;
    std::vector<std::vector<Box>> gts;
    std::vector<VotRun> runs;
    for (const SequenceRecord& seq : sequences) {
        preds.push_back(track_sequence(model, seq, config));
        gts.push_back(seq.gt);
        Tracker tracker(model, config);
        runs.push_back(vot_run(tracker, seq));
    }
    return make_report(preds, gts, runs);
}

void write_report_table(std::ostream& os, const EvalReport& r) {
    char line[96];
    std::snprintf(line, sizeof line, "%-16s %10s\n", "metric", "value");
    os << line;
    for (const auto& [name, value] : metric_values(r)) {
        std::snprintf(line, sizeof line, "%-16s %10.4f\n", name.c_str(), value);
        os << line;
    }
    std::snprintf(line, sizeof line, "%-16s %10zu\n%-16s %10zu\n", "failures", r.failures, "sequences", r.sequences);
    os << line;
}

void write_report_kv(std::ostream& os, const EvalReport& r) {
    char line[96];
    for (const auto& [name, value] : metric_values(r)) {
        std::snprintf(line, sizeof line, "%s=%.6f\n", name.c_str(), value);
        os << line;
    }
    os << "failures=" << r.failures << "\nsequences=" << r.sequences << "\nframes=" << r.frames << '\n';
}

}  // namespace igtrack
