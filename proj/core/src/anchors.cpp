#include "igtrack/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "igtrack/errors.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {

void AnchorSpec::validate() const {
    if (!(stride >= 1)) throw ConfigError("anchor stride must be >= 1");
    if (!(base_size >= 1)) throw ConfigError("anchor base_size must be >= 1");
    if (response_size < 1) throw ConfigError("anchor response_size must be >= 1");
    if (ratios.empty()) throw ConfigError("anchor ratios must be non-empty");
    for (double r : ratios) {
        if (!(r > 0) || !std::isfinite(r)) throw ConfigError("anchor ratios must be positive");
    }
}

AnchorGrid generate_anchors(const AnchorSpec& spec, double search_size) {
    spec.validate();
    AnchorGrid grid;
    grid.spec = spec;
    grid.search_size = search_size;
    grid.boxes.reserve(spec.count());
    const int n = spec.response_size;
    const double c0 = search_size / 2 - spec.stride * (n - 1) / 2;
    for (double ratio : spec.ratios) {
        const double root = std::sqrt(ratio);
        const double w = spec.base_size * root;
        const double h = spec.base_size / root;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                grid.boxes.push_back({c0 + j * spec.stride, c0 + i * spec.stride, w, h});
            }
        }
    }
    return grid;
}

std::size_t AnchorLabels::count(AnchorLabel which) const {
    return static_cast<std::size_t>(std::count(label.begin(), label.end(), which));
}

namespace {

void subsample(std::vector<std::size_t>& picked, std::size_t keep, Rng& rng, AnchorLabels& out) {
    if (picked.size() <= keep) return;
    rng.shuffle(std::span<std::size_t>(picked));
    for (std::size_t i = keep; i < picked.size(); ++i) {
        out.label[picked[i]] = AnchorLabel::kIgnore;
        out.target[picked[i]].reset();
    }
    picked.resize(keep);
}

}  // namespace

AnchorLabels assign_anchor_labels(const AnchorGrid& grid, const Box& gt, const LabelConfig& config,
                                  std::uint64_t seed) {
    if (!(config.lo >= 0 && config.lo < config.hi && config.hi <= 1)) {
        throw PreconditionError("assign_anchor_labels: need 0 <= lo < hi <= 1");
    }
    if (config.max_pos < 1) throw PreconditionError("assign_anchor_labels: max_pos must be >= 1");
    require_valid(gt, "assign_anchor_labels: gt");
    const std::size_t n = grid.size();
    AnchorLabels out;
    out.label.assign(n, AnchorLabel::kIgnore);
    out.target.assign(n, std::nullopt);
    out.degenerate_gt = gt.w <= 1 && gt.h <= 1;

    std::vector<double> overlaps(n);
    std::size_t best = 0;
    for (std::size_t a = 0; a < n; ++a) {
        overlaps[a] = iou(grid.boxes[a], gt);
        if (overlaps[a] > overlaps[best]) best = a;
    }

    bool any_positive = false;
    for (std::size_t a = 0; a < n; ++a) {
        if (!out.degenerate_gt && overlaps[a] >= config.hi) {
            out.label[a] = AnchorLabel::kPositive;
            any_positive = true;
        } else if (out.degenerate_gt || overlaps[a] <= config.lo) {
            out.label[a] = AnchorLabel::kNegative;
        }
    }
    if (!any_positive) out.label[best] = AnchorLabel::kPositive;

    std::vector<std::size_t> pos, neg;
    for (std::size_t a = 0; a < n; ++a) {
        if (out.label[a] == AnchorLabel::kPositive) {
            out.target[a] = encode(grid.boxes[a], gt);
            pos.push_back(a);
        } else if (out.label[a] == AnchorLabel::kNegative) {
            neg.push_back(a);
        }
    }
    Rng rng(seed);
    subsample(pos, config.max_pos, rng, out);
    subsample(neg, config.max_neg, rng, out);
    return out;
}

}  // namespace igtrack
