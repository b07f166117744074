#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "igtrack/dataset.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {

enum class MotionKind { kConstantVelocity, kSinusoidal, kRandomWalk };

MotionKind parse_motion_kind(const std::string& name);
std::string to_string(MotionKind kind);

struct SyntheticConfig {
    int n_sequences = 10;
    int n_frames = 60;
    int image_size = 320;
    MotionKind motion = MotionKind::kConstantVelocity;
    double scale_drift = 1.0;  // per-frame size multiplier
    int clutter = 3;           // distractor shapes per sequence
    std::uint64_t seed = 1;
    double speed = 3.0;  // pixels per frame
    double min_size = 40;
    double max_size = 72;

    /// Throws ConfigError for settings that cannot keep the target inside the frame.
    void validate() const;
};

/// Ground-truth path of one target. Centers move by (vx, vy) per frame (bent
/// by the motion kind), sizes are multiplied by scale_drift every frame, and
/// the box reflects off the image borders.
std::vector<Box> make_trajectory(const Box& initial, double vx, double vy, int n_frames, MotionKind motion,
                                 double scale_drift, int image_size, Rng& rng);

/// Textured rectangle target on a textured background with moving distractor
/// shapes. Fully determined by the config (including the seed).
Dataset gen_synthetic(const SyntheticConfig& config);

}  // namespace igtrack
