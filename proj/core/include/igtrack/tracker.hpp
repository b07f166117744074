#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "igtrack/anchors.hpp"
#include "igtrack/crop.hpp"
#include "igtrack/dataset.hpp"
#include "igtrack/iou_module.hpp"
#include "igtrack/net.hpp"

namespace igtrack {

/// Network weights plus the geometry derived from their config.
struct Model {
    NetConfig net;
    ParamStore params;
    AnchorGrid grid;

    static Model from_params(ParamStore params, const NetConfig& net = NetConfig::standard());
};

enum class TrackerMode { kBase, kIg };

TrackerMode parse_tracker_mode(const std::string& name);
std::string to_string(TrackerMode mode);

struct TrackerConfig {
    TrackerMode mode = TrackerMode::kIg;
    bool penalties = false;         // scale/ratio penalty re-ranking (base mode)
    double penalty_k = 0.055;
    double window_influence = 0.0;  // cosine window blend (base mode)
    bool nms = false;               // greedy NMS stage before selection (base mode)
    double nms_threshold = 0.7;
    double alpha = 0.3;
    int top_k = 5;
    bool use_motion = true;  // IG mode: consult the learned motion block

    /// Base: penalties on, window 0.42. IG: both off.
    static TrackerConfig defaults(TrackerMode mode);
};

/// Mutable per-sequence state. Template features are computed once at init.
struct TrackerState {
    Box current_box;
    double vx = 0;
    double vy = 0;
    Tensor template_features;
    TrackerConfig config;
    int frame_width = 0;
    int frame_height = 0;
    std::size_t last_anchor = 0;  // anchor index chosen in the last frame
};

/// Minimal interface the evaluation protocols drive.
class SequenceTracker {
public:
    virtual ~SequenceTracker() = default;
    virtual void init(const Image& frame, const Box& box) = 0;
    virtual Box update(const Image& frame) = 0;
};

class Tracker final : public SequenceTracker {
public:
    Tracker(const Model& model, TrackerConfig config) : model_(model), config_(std::move(config)) {}

    void init(const Image& frame, const Box& box) override;
    Box update(const Image& frame) override;

    const TrackerState& state() const { return state_; }
    /// Resume from a state produced by init/update of the same model.
    void restore(const TrackerState& state) {
        state_ = state;
        config_ = state.config;
        initialized_ = true;
    }

private:
    std::size_t select_base(const Tensor& cls, const Tensor& reg, const Box& prev_in_crop,
                            std::vector<Box>& decoded) const;

    const Model& model_;
    TrackerConfig config_;
    TrackerState state_;
    bool initialized_ = false;
};

TrackerState track_init(const Model& model, const Image& frame, const Box& box, const TrackerConfig& config);
/// One step on an explicit state; returns the new frame-coordinate box.
Box track_frame(const Model& model, TrackerState& state, const Image& frame);

/// Init on gt[0], then one update per remaining frame. Entry 0 is gt[0].
std::vector<Box> track_sequence(const Model& model, const SequenceRecord& sequence, const TrackerConfig& config);

/// Outer product of two Hann windows of length n (numpy.hanning convention).
std::vector<double> hanning_window(int n);

/// Greedy non-maximum suppression; returns kept indices best-first.
std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores, double threshold);

}  // namespace igtrack
