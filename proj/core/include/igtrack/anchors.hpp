#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "igtrack/geometry.hpp"

namespace igtrack {

struct AnchorSpec {
    double stride = 8;
    std::vector<double> ratios{1.0 / 3, 1.0 / 2, 1.0, 2.0, 3.0};  // w / h
    double base_size = 64;
    int response_size = 17;

    void validate() const;
    std::size_t count() const {
        return ratios.size() * static_cast<std::size_t>(response_size) * response_size;
    }
};

/// Anchors in (ratio, row, column) order, in search-image pixels.
struct AnchorGrid {
    AnchorSpec spec;
    double search_size = 0;
    std::vector<Box> boxes;

    std::size_t size() const { return boxes.size(); }
    std::size_t index(std::size_t ratio, std::size_t row, std::size_t col) const {
        const std::size_t r = static_cast<std::size_t>(spec.response_size);
        return (ratio * r + row) * r + col;
    }
};

/// Equal-area anchors (w = base*sqrt(r), h = base/sqrt(r)) on a grid centered on
/// the search image.
AnchorGrid generate_anchors(const AnchorSpec& spec, double search_size);

enum class AnchorLabel : std::uint8_t { kNegative = 0, kPositive = 1, kIgnore = 2 };

struct LabelConfig {
    double hi = 0.6;
    double lo = 0.3;
    std::size_t max_pos = 16;
    std::size_t max_neg = 48;
};

struct AnchorLabels {
    std::vector<AnchorLabel> label;
    std::vector<std::optional<RegressionDelta>> target;  // set for positives only
    bool degenerate_gt = false;

    std::size_t count(AnchorLabel which) const;
};

/// IoU thresholding with a forced best anchor when nothing clears `hi`, then
/// seeded subsampling of positives and negatives. Surplus anchors become
/// kIgnore.
AnchorLabels assign_anchor_labels(const AnchorGrid& grid, const Box& gt, const LabelConfig& config,
                                  std::uint64_t seed);

}  // namespace igtrack
