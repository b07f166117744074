#include "igtrack/crop.hpp"

#include <algorithm>
#include <cmath>

#include "igtrack/errors.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {

Box CropWindow::to_crop(const Box& b) const {
    const double s = scale();
    return {(b.cx - cx + side / 2) * s, (b.cy - cy + side / 2) * s, b.w * s, b.h * s};
}

Box CropWindow::to_frame(const Box& b) const {
    const double s = scale();
    return {b.cx / s + cx - side / 2, b.cy / s + cy - side / 2, b.w / s, b.h / s};
}

double context_side(const Box& b) {
    const double p = (b.w + b.h) / 2;
    return std::sqrt((b.w + p) * (b.h + p));
}

Patch crop_patch(const Image& frame, const CropWindow& window) {
    if (window.out_size < 1 || !(window.side > 0)) throw PreconditionError("crop: empty window");
    if (frame.width < 1 || frame.height < 1) throw PreconditionError("crop: empty frame");
    const int n = window.out_size;
    const auto mean = frame.mean_color();
    Patch patch{Tensor({3, static_cast<std::size_t>(n), static_cast<std::size_t>(n)}), window};
    const double step = window.side / n;
    const double left = window.cx - window.side / 2;
    const double top = window.cy - window.side / 2;
    const std::size_t plane = static_cast<std::size_t>(n) * n;

    auto sample = [&](int x, int y, int c) -> double {
        if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) return mean[static_cast<std::size_t>(c)];
        return frame.pixel(x, y)[c];
    };
    for (int v = 0; v < n; ++v) {
        const double sy = top + (v + 0.5) * step - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int u = 0; u < n; ++u) {
            const double sx = left + (u + 0.5) * step - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top_row = sample(x0, y0, c) * (1 - fx) + sample(x0 + 1, y0, c) * fx;
                const double bottom_row = sample(x0, y0 + 1, c) * (1 - fx) + sample(x0 + 1, y0 + 1, c) * fx;
                const double value = top_row * (1 - fy) + bottom_row * fy;
                patch.data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(v) * n + u] =
                    static_cast<float>(value / 255.0);
            }
        }
    }
    return patch;
}

Patch crop_template(const Image& frame, const Box& box, int template_size) {
    require_valid(box, "crop_template: box");
    return crop_patch(frame, {box.cx, box.cy, context_side(box), template_size});
}

Patch crop_search(const Image& frame, const Box& box, int template_size, int search_size) {
    require_valid(box, "crop_search: box");
    const double side = context_side(box) * search_size / template_size;
    return crop_patch(frame, {box.cx, box.cy, side, search_size});
}

TrainingPair sample_pair(const Dataset& dataset, std::uint64_t seed, int max_gap, int template_size, int search_size) {
    if (dataset.empty()) throw PreconditionError("sample_pair: empty dataset");
    if (max_gap < 0) throw PreconditionError("sample_pair: max_gap must be >= 0");
    Rng rng(seed);
    TrainingPair pair;
    pair.sequence = static_cast<std::size_t>(rng.below(dataset.size()));
    const SequenceRecord& seq = dataset[pair.sequence];
    const std::size_t n = seq.size();
    const std::size_t gap = static_cast<std::size_t>(rng.below(std::min<std::size_t>(max_gap, n - 1) + 1));
    pair.template_frame = static_cast<std::size_t>(rng.below(n - gap));
    pair.search_frame = pair.template_frame + gap;
    pair.frame_gap = static_cast<int>(gap);

    const Box& earlier = seq.gt[pair.template_frame];
    Patch z = crop_template(seq.frames[pair.template_frame], earlier, template_size);
    Patch x = crop_search(seq.frames[pair.search_frame], earlier, template_size, search_size);
    pair.template_patch = std::move(z.data);
    pair.search_patch = std::move(x.data);
    pair.gt_in_search = x.window.to_crop(seq.gt[pair.search_frame]);
    pair.prev_in_search = x.window.to_crop(earlier);
    if (pair.template_frame > 0) {
        const Box& before = seq.gt[pair.template_frame - 1];
        const double s = x.window.scale() * static_cast<double>(gap);
        pair.vx = (earlier.cx - before.cx) * s;
        pair.vy = (earlier.cy - before.cy) * s;
    }
    return pair;
}

}  // namespace igtrack
