// igtrack: data generation, training, tracking, evaluation and verification.

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "igtrack/checkpoint.hpp"
#include "igtrack/compare.hpp"
#include "igtrack/dataset.hpp"
#include "igtrack/errors.hpp"
#include "igtrack/eval.hpp"
#include "igtrack/gradcheck.hpp"
#include "igtrack/synthetic.hpp"
#include "igtrack/tracker.hpp"
#include "igtrack/train.hpp"

namespace fs = std::filesystem;
using namespace igtrack;

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string on_off(bool v) { return v ? "on" : "off"; }

bool parse_on_off(const std::string& v, const char* flag) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw ConfigError(std::string(flag) + " must be on or off");
}

/// Resolved settings in the same key=value form --config accepts.
void write_run_config(const fs::path& path, const std::string& command, const KeyValues& kv) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "# igtrack " << command << '\n';
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

fs::path sibling(const fs::path& out, const std::string& suffix) { return fs::path(out.string() + suffix); }

// Options that must be set by a flag or the config file. CLI11's required()
// is checked before the config file is merged, so the check happens later.
std::vector<CLI::Option*> required_options;

CLI::Option* required(CLI::Option* opt) {
    required_options.push_back(opt);
    return opt;
}

void add_config(CLI::App* sub) {
    sub->add_option("--config", "Read flat key=value options from FILE (flags take precedence)")->type_name("FILE");
}

/// Fills options the command line left unset from the subcommand's --config
/// file, then enforces required options.
void merge_config(CLI::App* sub) {
    const CLI::Option* config = sub->get_option("--config");
    if (config->count() > 0) {
        const std::string path = config->as<std::string>();
        if (!fs::exists(path)) throw IoError("cannot read config " + path);
        for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(path)) {
            CLI::Option* opt = item.parents.empty() && item.name != "config"
                                   ? sub->get_option_no_throw("--" + item.name)
                                   : nullptr;
            if (opt == nullptr) throw ConfigError("unknown config key: " + item.fullname());
            if (opt->count() == 0) {
                opt->add_result(item.inputs);
                opt->run_callback();
            }
        }
    }
    for (const CLI::Option* opt : required_options) {
        if (sub->get_option_no_throw(opt->get_name()) == opt && opt->count() == 0) throw UsageError(opt->get_name() + " is required");
    }
}

// ---------------------------------------------------------------- gen-data

struct GenOptions {
    std::string out;
    SyntheticConfig cfg;
    std::string motion = "constant-velocity";
};

void setup_gen(CLI::App& app, GenOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("gen-data", "Write a seeded synthetic dataset (PPM frames + groundtruth.csv)");
    add_config(sub);
    required(sub->add_option("--out", o.out, "Output directory"));
    sub->add_option("--sequences", o.cfg.n_sequences, "Number of sequences")->capture_default_str();
    sub->add_option("--frames", o.cfg.n_frames, "Frames per sequence")->capture_default_str();
    sub->add_option("--size", o.cfg.image_size, "Frame side in pixels")->capture_default_str();
    sub->add_option("--motion", o.motion, "constant-velocity | constant | sinusoidal | random-walk")
        ->capture_default_str();
    sub->add_option("--drift", o.cfg.scale_drift, "Per-frame size multiplier")->capture_default_str();
    sub->add_option("--speed", o.cfg.speed, "Target speed in pixels per frame")->capture_default_str();
    sub->add_option("--clutter", o.cfg.clutter, "Distractors per sequence")->capture_default_str();
    sub->add_option("--seed", o.cfg.seed, "Random seed")->capture_default_str();
    sub->callback([&] {
        run = [&] {
            o.cfg.motion = parse_motion_kind(o.motion);
            o.cfg.validate();
            const Dataset d = gen_synthetic(o.cfg);
            write_dataset(d, o.out);
            write_run_config(fs::path(o.out) / "run_config.txt", "gen-data",
                             {{"out", o.out},
                              {"sequences", num(o.cfg.n_sequences)},
                              {"frames", num(o.cfg.n_frames)},
                              {"size", num(o.cfg.image_size)},
                              {"motion", to_string(o.cfg.motion)},
                              {"drift", num(o.cfg.scale_drift)},
                              {"speed", num(o.cfg.speed)},
                              {"clutter", num(o.cfg.clutter)},
                              {"seed", num(o.cfg.seed)}});
            std::cout << "wrote " << d.size() << " sequences to " << o.out << '\n';
        };
    });
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string data;
    std::string out;
    std::string mode = "ig";
    std::size_t holdout = 0;
    TrainConfig cfg;
};

void add_train_flags(CLI::App* sub, TrainConfig& c, std::string& mode) {
    sub->add_option("--mode", mode, "base | ig")->capture_default_str();
    sub->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--steps", c.steps_per_epoch, "SGD steps per epoch")->capture_default_str();
    sub->add_option("--batch", c.batch, "Pairs per step")->capture_default_str();
    sub->add_option("--lr0", c.lr_start, "Learning rate at the first epoch")->capture_default_str();
    sub->add_option("--lr1", c.lr_end, "Learning rate at the last epoch")->capture_default_str();
    sub->add_option("--momentum", c.momentum, "SGD momentum")->capture_default_str();
    sub->add_option("--grad-clip", c.grad_clip, "Global gradient-norm clip (<= 0 disables)")->capture_default_str();
    sub->add_option("--max-gap", c.max_gap, "Largest frame gap between template and search")->capture_default_str();
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--k", c.iou.top_k, "Proposals fed to the IOU module")->capture_default_str();
    sub->add_option("--alpha", c.iou.alpha, "Size interpolation weight")->capture_default_str();
    sub->add_option("--beta", c.iou.beta, "Soft-selection sharpness")->capture_default_str();
}

KeyValues train_kv(const TrainConfig& c) {
    return {{"mode", to_string(c.mode)},       {"epochs", num(c.epochs)},   {"steps", num(c.steps_per_epoch)},
            {"batch", num(c.batch)},           {"lr0", num(c.lr_start)},    {"lr1", num(c.lr_end)},
            {"momentum", num(c.momentum)},     {"grad-clip", num(c.grad_clip)}, {"max-gap", num(c.max_gap)},
            {"seed", num(c.seed)},             {"k", num(c.iou.top_k)},     {"alpha", num(c.iou.alpha)},
            {"beta", num(c.iou.beta)}};
}

void setup_train(CLI::App& app, TrainOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("train", "Train a model; writes the checkpoint, OUT.log and OUT.config");
    add_config(sub);
    required(sub->add_option("--data", o.data, "Dataset directory"));
    required(sub->add_option("--out", o.out, "Checkpoint path"));
    sub->add_option("--holdout", o.holdout, "Leave the last N sequences out of training")->capture_default_str();
    add_train_flags(sub, o.cfg, o.mode);
    sub->callback([&] {
        run = [&] {
            o.cfg.mode = parse_tracker_mode(o.mode);
            o.cfg.validate();
            if (!fs::is_directory(o.data)) throw IoError("data directory not found: " + o.data);
            const DatasetSplit split = split_dataset(read_dataset(o.data), o.holdout);
            KeyValues kv{{"data", o.data}, {"out", o.out}, {"holdout", num(static_cast<std::uint64_t>(o.holdout))}};
            for (auto& e : train_kv(o.cfg)) kv.push_back(std::move(e));
            write_run_config(sibling(o.out, ".config"), "train", kv);

            std::ofstream log(sibling(o.out, ".log"));
            if (!log) throw IoError("cannot write " + sibling(o.out, ".log").string());
            write_log_header(log, o.cfg);
            const TrainResult result = train(split.train, o.cfg, [&](const StepLog& e) {
                write_log_line(log, e);
                if (e.step + 1 == o.cfg.steps_per_epoch) {
                    std::cout << "epoch " << e.epoch << " total " << e.loss.total << " lr " << e.lr << '\n';
                }
            });
            save_checkpoint(result.params, o.out);
            std::cout << "wrote " << o.out << '\n';
        };
    });
}

// ---------------------------------------------------------------- track

struct TrackerFlags {
    std::string mode = "ig";
    std::string penalties;  // empty: mode default
    std::string motion = "on";
    std::string nms = "off";
    double penalty_k = 0.055;
    double window = -1;  // negative: mode default
    int k = 5;
    double alpha = 0.3;
};

void add_tracker_flags(CLI::App* sub, TrackerFlags& t, const std::string& prefix = "") {
    sub->add_option("--" + prefix + "mode", t.mode, "base | ig")->capture_default_str();
    sub->add_option("--" + prefix + "penalties", t.penalties, "on | off (default: on for base, off for ig)");
    sub->add_option("--" + prefix + "penalty-k", t.penalty_k, "Scale/ratio penalty strength")->capture_default_str();
    sub->add_option("--" + prefix + "window", t.window, "Cosine window influence (default: 0.42 base, 0 ig)");
    sub->add_option("--" + prefix + "nms", t.nms, "on | off: NMS stage before selection (base mode)")
        ->capture_default_str();
    sub->add_option("--" + prefix + "motion", t.motion, "on | off: use the learned motion block (ig mode)")
        ->capture_default_str();
    sub->add_option("--" + prefix + "k", t.k, "Top-K proposals (ig mode)")->capture_default_str();
    sub->add_option("--" + prefix + "alpha", t.alpha, "Size interpolation weight")->capture_default_str();
}

TrackerConfig resolve(const TrackerFlags& f) {
    TrackerConfig c = TrackerConfig::defaults(parse_tracker_mode(f.mode));
    if (!f.penalties.empty()) c.penalties = parse_on_off(f.penalties, "--penalties");
    if (f.window >= 0) c.window_influence = f.window;
    if (c.window_influence > 1) throw ConfigError("--window must be in [0, 1]");
    c.penalty_k = f.penalty_k;
    c.nms = parse_on_off(f.nms, "--nms");
    c.use_motion = parse_on_off(f.motion, "--motion");
    if (f.k < 1) throw ConfigError("--k must be >= 1");
    if (f.alpha < 0 || f.alpha > 1) throw ConfigError("--alpha must be in [0, 1]");
    c.top_k = f.k;
    c.alpha = f.alpha;
    return c;
}

KeyValues tracker_kv(const TrackerConfig& c, const std::string& prefix = "") {
    return {{prefix + "mode", to_string(c.mode)},       {prefix + "penalties", on_off(c.penalties)},
            {prefix + "penalty-k", num(c.penalty_k)},   {prefix + "window", num(c.window_influence)},
            {prefix + "nms", on_off(c.nms)},            {prefix + "motion", on_off(c.use_motion)},
            {prefix + "k", num(c.top_k)},               {prefix + "alpha", num(c.alpha)}};
}

struct TrackOptions {
    std::string model;
    std::string sequence;
    std::string out;
    TrackerFlags tracker;
};

void setup_track(CLI::App& app, TrackOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("track", "Track one sequence; writes per-frame boxes as i,x1,y1,w,h");
    add_config(sub);
    required(sub->add_option("--model", o.model, "Checkpoint"));
    required(sub->add_option("--sequence", o.sequence, "Sequence directory"));
    required(sub->add_option("--out", o.out, "Prediction CSV"));
    add_tracker_flags(sub, o.tracker);
    sub->callback([&] {
        run = [&] {
            const TrackerConfig cfg = resolve(o.tracker);
            const Model model = Model::from_params(load_checkpoint(o.model));
            const SequenceRecord seq = read_sequence(o.sequence);
            const std::vector<Box> pred = track_sequence(model, seq, cfg);
            write_boxes_csv(pred, o.out);
            KeyValues kv{{"model", o.model}, {"sequence", o.sequence}, {"out", o.out}};
            for (auto& e : tracker_kv(cfg)) kv.push_back(std::move(e));
            write_run_config(sibling(o.out, ".config"), "track", kv);
            std::cout << "wrote " << pred.size() << " boxes to " << o.out << '\n';
        };
    });
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::string pred;
    std::string gt;
    std::string protocol = "got";
    std::string out;
};

void setup_eval(CLI::App& app, EvalOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("eval", "Score a prediction CSV against ground truth");
    add_config(sub);
    required(sub->add_option("--pred", o.pred, "Prediction CSV"));
    required(sub->add_option("--gt", o.gt, "Ground-truth CSV"));
    sub->add_option("--protocol", o.protocol, "got (one pass) | vot (replayed with re-initialization)")
        ->capture_default_str();
    sub->add_option("--out", o.out, "Report file (key=value)");
    sub->callback([&] {
        run = [&] {
            if (o.protocol != "got" && o.protocol != "vot") throw ConfigError("--protocol must be got or vot");
            const std::vector<Box> pred = read_boxes_csv(o.pred);
            const std::vector<Box> gt = read_boxes_csv(o.gt);
            if (pred.size() != gt.size()) {
                throw PreconditionError("prediction has " + std::to_string(pred.size()) + " frames, ground truth has " +
                                        std::to_string(gt.size()));
            }
            KeyValues report;
            if (o.protocol == "got") {
                const GotMetrics m = got_metrics(pred, gt);
                report = {{"ao", num(m.ao)},
                          {"sr50", num(m.sr50)},
                          {"sr75", num(m.sr75)},
                          {"precision20", num(precision_center(pred, gt))},
                          {"frames", num(static_cast<std::uint64_t>(m.frames))}};
            } else {
                const VotRun r = vot_offline(pred, gt);
                report = {{"accuracy", num(accuracy({r}))},
                          {"failures", num(static_cast<std::uint64_t>(r.failures()))},
                          {"robustness", num(robustness({r}))},
                          {"failures_per_100", num(failures_per_100({r}))},
                          {"eao_approx", num(r.segments.empty() ? 0.0 : eao_approx(r.segments))}};
            }
            std::ostringstream text;
            for (const auto& [k, v] : report) text << k << '=' << v << '\n';
            std::cout << text.str();
            if (!o.out.empty()) {
                std::ofstream os(o.out);
                if (!os) throw IoError("cannot write " + o.out);
                os << text.str();
                write_run_config(sibling(o.out, ".config"), "eval",
                                 {{"pred", o.pred}, {"gt", o.gt}, {"protocol", o.protocol}, {"out", o.out}});
            }
        };
    });
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    GradcheckConfig cfg;
};

int gradcheck_status = 0;

void setup_gradcheck(CLI::App& app, GradcheckOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
    add_config(sub);
    sub->add_option("--seed", o.cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--tolerance", o.cfg.tolerance, "Maximum relative error per group")->capture_default_str();
    sub->add_option("--step", o.cfg.step, "Central-difference step")->capture_default_str();
    sub->callback([&] {
        run = [&] {
            const GradcheckReport r = run_gradcheck(o.cfg);
            write_gradcheck_report(std::cout, r);
            gradcheck_status = r.pass ? 0 : 1;
        };
    });
}

// ---------------------------------------------------------------- compare

TrackerFlags flags_for(const std::string& mode) {
    TrackerFlags f;
    f.mode = mode;
    return f;
}

struct CompareOptions {
    std::string data;
    std::string out;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string unused_mode;
    CompareConfig cfg;
    TrackerFlags base = flags_for("base");
    TrackerFlags ig = flags_for("ig");
};

void setup_compare(CLI::App& app, CompareOptions& o, std::function<void()>& run) {
    auto* sub = app.add_subcommand("compare", "Train base and ig per seed and compare them on the held-out split");
    add_config(sub);
    required(sub->add_option("--data", o.data, "Dataset directory"));
    required(sub->add_option("--out", o.out, "Table file"));
    sub->add_option("--seeds", o.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
    sub->add_option("--holdout", o.cfg.holdout, "Held-out sequences (the last N)")->capture_default_str();
    TrainConfig& t = o.cfg.train;
    sub->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--steps", t.steps_per_epoch, "SGD steps per epoch")->capture_default_str();
    sub->add_option("--batch", t.batch, "Pairs per step")->capture_default_str();
    sub->add_option("--lr0", t.lr_start, "Learning rate at the first epoch")->capture_default_str();
    sub->add_option("--lr1", t.lr_end, "Learning rate at the last epoch")->capture_default_str();
    sub->add_option("--max-gap", t.max_gap, "Largest frame gap between template and search")->capture_default_str();
    sub->add_option("--train-k", t.iou.top_k, "Proposals fed to the IOU module in training")->capture_default_str();
    sub->add_option("--train-alpha", t.iou.alpha, "Size interpolation weight in training")->capture_default_str();
    sub->add_option("--beta", t.iou.beta, "Soft-selection sharpness")->capture_default_str();
    add_tracker_flags(sub, o.base, "base-");
    add_tracker_flags(sub, o.ig, "ig-");
    sub->callback([&] {
        run = [&] {
            o.cfg.seeds = o.seeds;
            o.cfg.base_tracker = resolve(o.base);
            o.cfg.ig_tracker = resolve(o.ig);
            if (o.cfg.base_tracker.mode != TrackerMode::kBase || o.cfg.ig_tracker.mode != TrackerMode::kIg) {
                throw ConfigError("--base-mode must be base and --ig-mode must be ig");
            }
            o.cfg.train.validate();
            if (!fs::is_directory(o.data)) throw IoError("data directory not found: " + o.data);
            const Dataset dataset = read_dataset(o.data);

            std::string seeds;
            for (std::uint64_t s : o.seeds) seeds += (seeds.empty() ? "" : ",") + num(s);
            KeyValues kv{{"data", o.data}, {"out", o.out}, {"seeds", seeds},
                         {"holdout", num(static_cast<std::uint64_t>(o.cfg.holdout))}};
            for (auto& e : train_kv(t)) {
                if (e.first == "mode" || e.first == "seed" || e.first == "momentum" || e.first == "grad-clip") continue;
                if (e.first == "k") e.first = "train-k";
                if (e.first == "alpha") e.first = "train-alpha";
                kv.push_back(std::move(e));
            }
            for (auto& e : tracker_kv(o.cfg.base_tracker, "base-")) kv.push_back(std::move(e));
            for (auto& e : tracker_kv(o.cfg.ig_tracker, "ig-")) kv.push_back(std::move(e));
            write_run_config(sibling(o.out, ".config"), "compare", kv);

            const CompareResult result =
                run_compare(dataset, o.cfg, [](const std::string& msg) { std::cout << msg << std::endl; });
            std::ostringstream table;
            write_compare_table(table, result);
            std::cout << table.str();
            std::ofstream os(o.out);
            if (!os) throw IoError("cannot write " + o.out);
            os << table.str();
        };
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"igtrack: Siamese region-proposal tracker with an IOU-guided training module"};
    app.require_subcommand(1);
    std::function<void()> run;

    GenOptions gen;
    TrainOptions tr;
    TrackOptions tk;
    EvalOptions ev;
    GradcheckOptions gc;
    CompareOptions cmp;
    setup_gen(app, gen, run);
    setup_train(app, tr, run);
    setup_track(app, tk, run);
    setup_eval(app, ev, run);
    setup_gradcheck(app, gc, run);
    setup_compare(app, cmp, run);

    CLI11_PARSE(app, argc, argv);
    try {
        merge_config(app.get_subcommands().front());
        run();
    } catch (const std::exception& e) {
        std::cerr << "igtrack: " << e.what() << '\n';
        return 2;
    }
    return gradcheck_status;
}
