#pragma once

#include <cstdint>

#include "igtrack/dataset.hpp"
#include "igtrack/geometry.hpp"
#include "igtrack/image.hpp"
#include "igtrack/tensor.hpp"

namespace igtrack {

/// Square frame region [cx - side/2, cx + side/2]^2 resampled to out_size^2.
struct CropWindow {
    double cx = 0;
    double cy = 0;
    double side = 1;
    int out_size = 1;

    double scale() const { return out_size / side; }
    Box to_crop(const Box& b) const;
    Box to_frame(const Box& b) const;
};

struct Patch {
    Tensor data;  // 3 x out x out, values in [0, 1]
    CropWindow window;
};

/// Side of the context square around a box: sqrt((w + p)(h + p)), p = (w + h)/2.
double context_side(const Box& b);

/// Bilinear resampling; samples outside the frame take the frame's mean color.
Patch crop_patch(const Image& frame, const CropWindow& window);

Patch crop_template(const Image& frame, const Box& box, int template_size = 127);
/// Same center, side scaled by search_size / template_size.
Patch crop_search(const Image& frame, const Box& box, int template_size = 127, int search_size = 255);

struct TrainingPair {
    Tensor template_patch;
    Tensor search_patch;
    Box gt_in_search;
    Box prev_in_search;  // earlier frame's box, search-crop pixels
    int frame_gap = 0;
    double vx = 0;  // expected displacement over the pair, search-crop pixels
    double vy = 0;
    std::size_t sequence = 0;
    std::size_t template_frame = 0;
    std::size_t search_frame = 0;
};

/// Uniform sequence, gap uniform in [0, max_gap], then the earlier frame. Both
/// crops are centered on the earlier frame's box. The velocity is the
/// displacement observed just before the template frame, scaled by the gap
/// (zero for the first frame).
TrainingPair sample_pair(const Dataset& dataset, std::uint64_t seed, int max_gap, int template_size = 127,
                         int search_size = 255);

}  // namespace igtrack
