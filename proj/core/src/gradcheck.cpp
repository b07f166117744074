#include "igtrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "igtrack/errors.hpp"
#include "igtrack/rng.hpp"
#include "igtrack/synthetic.hpp"
#include "igtrack/train.hpp"

namespace igtrack {

namespace {

std::string group_of(const std::string& name) {
    for (const char* g : kParamGroups) {
        const std::string prefix = std::string(g) + ".";
        if (name.rfind(prefix, 0) == 0) return g;
    }
    throw PreconditionError("parameter '" + name + "' belongs to no group");
}

struct Problem {
    NetConfig net;
    AnchorGrid grid;
    BasicTensor<double> z, x;
    Box gt;
    MotionState motion;
    AnchorLabels labels;
    PairObjective objective;

    PairEvaluation<double> eval(const BasicParamStore<double>& p, bool grads) const {
        return evaluate_pair(p, net, grid, z, x, gt, motion, labels, objective, grads);
    }
};

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
    if (!(config.step > 0) || !(config.tolerance > 0)) throw ConfigError("gradcheck: step and tolerance must be positive");
    Rng rng(mix_seed(config.seed, 0x6763));

    SyntheticConfig data;
    data.n_sequences = 1;
    data.n_frames = 8;
    data.seed = config.seed;
    const Dataset dataset = gen_synthetic(data);

    Problem pb;
    pb.net = NetConfig::reduced();
    pb.grid = generate_anchors(anchor_spec_for(pb.net), pb.net.search_size);
    const TrainingPair pair = sample_pair(dataset, mix_seed(config.seed, 1), 4, pb.net.template_size, pb.net.search_size);
    pb.z = pair.template_patch.cast<double>();
    pb.x = pair.search_patch.cast<double>();
    pb.gt = pair.gt_in_search;
    // A non-trivial velocity so the motion block's inputs are all exercised.
    pb.motion = {pair.prev_in_search, pair.vx + rng.uniform(-2, 2), pair.vy + rng.uniform(-2, 2)};
    pb.labels = assign_anchor_labels(pb.grid, pb.gt, LabelConfig{}, mix_seed(config.seed, 2));

    BasicParamStore<double> params = init_params<double>(pb.net, config.seed);
    // Randomize biases and the motion block away from their zero init.
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, t] = params.entry(i);
        const bool is_bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
        if (is_bias || name.rfind("motion.", 0) == 0) {
            for (double& v : t.values()) v = rng.uniform(-0.05, 0.05);
        }
    }

    const PairEvaluation<double> base = pb.eval(params, true);
    GradcheckReport report;
    report.loss = base.loss.total;
    for (const char* g : kParamGroups) report.groups.push_back({g, 0, 0, 0.0, false});

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, tensor] = params.entry(i);
        const std::string group = group_of(name);
        GroupCheck& gc = *std::find_if(report.groups.begin(), report.groups.end(),
                                       [&](const GroupCheck& c) { return c.group == group; });
        const auto& analytic = base.grads.at(name);
        std::size_t stride = 1;
        if (config.max_per_group > 0 && tensor.size() > config.max_per_group) stride = tensor.size() / config.max_per_group;
        for (std::size_t k = 0; k < tensor.size(); k += stride) {
            const double orig = tensor[k];
            bool done = false;
            for (double h = config.step; h >= config.step / 100 * 0.999 && !done; h /= 10) {
                tensor[k] = orig + h;
                const PairEvaluation<double> plus = pb.eval(params, false);
                tensor[k] = orig - h;
                const PairEvaluation<double> minus = pb.eval(params, false);
                tensor[k] = orig;
                const bool same_piece = plus.relu_signature == base.relu_signature &&
                                        minus.relu_signature == base.relu_signature &&
                                        plus.branch_signature == base.branch_signature &&
                                        minus.branch_signature == base.branch_signature;
                if (!same_piece) continue;
                const double numeric = (plus.loss.total - minus.loss.total) / (2 * h);
                const double a = analytic[k];
                const double scale = std::max(std::abs(a), std::abs(numeric));
                if (scale >= config.negligible) gc.max_rel_error = std::max(gc.max_rel_error, std::abs(a - numeric) / scale);
                ++gc.checked;
                done = true;
            }
            if (!done) ++gc.skipped;
        }
    }
    report.pass = true;
    for (GroupCheck& gc : report.groups) {
        gc.pass = gc.checked > 0 && gc.max_rel_error < config.tolerance;
        report.pass = report.pass && gc.pass;
    }
    return report;
}

void write_gradcheck_report(std::ostream& os, const GradcheckReport& r) {
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %14s %s\n", "group", "checked", "skipped", "max_rel_error", "result");
    os << line;
    for (const GroupCheck& g : r.groups) {
        std::snprintf(line, sizeof line, "%-10s %8zu %8zu %14.3e %s\n", g.group.c_str(), g.checked, g.skipped,
                      g.max_rel_error, g.pass ? "PASS" : "FAIL");
        os << line;
    }
    os << (r.pass ? "PASS" : "FAIL") << '\n';
}

}  // namespace igtrack
