#include "igtrack/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "igtrack/errors.hpp"

namespace igtrack {

MotionKind parse_motion_kind(const std::string& name) {
    if (name == "constant-velocity" || name == "constant") return MotionKind::kConstantVelocity;
    if (name == "sinusoidal") return MotionKind::kSinusoidal;
    if (name == "random-walk") return MotionKind::kRandomWalk;
    throw ConfigError("unknown motion kind '" + name + "' (constant-velocity|sinusoidal|random-walk)");
}

std::string to_string(MotionKind kind) {
    switch (kind) {
        case MotionKind::kConstantVelocity: return "constant-velocity";
        case MotionKind::kSinusoidal: return "sinusoidal";
        case MotionKind::kRandomWalk: return "random-walk";
    }
    return "?";
}

void SyntheticConfig::validate() const {
    if (n_sequences < 1) throw ConfigError("sequences must be >= 1");
    if (n_frames < 2) throw ConfigError("frames must be >= 2 (got " + std::to_string(n_frames) + ")");
    if (image_size < 320) throw ConfigError("image size must be >= 320 (got " + std::to_string(image_size) + ")");
    if (clutter < 0) throw ConfigError("clutter must be >= 0");
    if (!(scale_drift > 0)) throw ConfigError("scale drift must be positive");
    if (!(min_size >= 4 && min_size <= max_size)) throw ConfigError("target size range is invalid");
    // Largest side over the sequence, for the widest aspect ratio used (2:1).
    const double growth = std::pow(std::max(scale_drift, 1.0), n_frames - 1);
    const double shrink = std::pow(std::min(scale_drift, 1.0), n_frames - 1);
    if (max_size * std::sqrt(2.0) * growth > image_size - 2) {
        throw ConfigError("target would grow larger than the frame; reduce scale drift, frames or max size");
    }
    if (min_size / std::sqrt(2.0) * shrink < 4) throw ConfigError("target would shrink below 4 pixels");
}

namespace {

void reflect(double& c, double& v, double half, double limit) {
    if (c - half < 0) {
        c += 2 * (half - c);
        v = std::abs(v);
    } else if (c + half > limit) {
        c -= 2 * (c + half - limit);
        v = -std::abs(v);
    }
    c = std::clamp(c, half, limit - half);
}

}  // namespace

std::vector<Box> make_trajectory(const Box& initial, double vx, double vy, int n_frames, MotionKind motion,
                                 double scale_drift, int image_size, Rng& rng) {
    require_valid(initial, "trajectory start");
    const double limit = image_size;
    std::vector<Box> path{initial};
    Box b = initial;
    const double speed = std::hypot(vx, vy);
    const double period = rng.uniform(20, 40);
    const double wobble = rng.uniform(0.5, 1.0);
    for (int t = 1; t < n_frames; ++t) {
        double sx = vx, sy = vy;
        if (motion == MotionKind::kSinusoidal) {
            // Oscillate perpendicular to the heading.
            const double phase = wobble * speed * std::cos(2 * std::numbers::pi * t / period);
            const double norm = speed > 0 ? speed : 1.0;
            sx += -vy / norm * phase;
            sy += vx / norm * phase;
        } else if (motion == MotionKind::kRandomWalk) {
            vx += 0.5 * rng.normal();
            vy += 0.5 * rng.normal();
            const double cap = std::max(2.0 * speed, 1.0);
            const double s = std::hypot(vx, vy);
            if (s > cap) {
                vx *= cap / s;
                vy *= cap / s;
            }
            sx = vx;
            sy = vy;
        }
        b.w *= scale_drift;
        b.h *= scale_drift;
        b.cx += sx;
        b.cy += sy;
        reflect(b.cx, vx, b.w / 2, limit);
        reflect(b.cy, vy, b.h / 2, limit);
        path.push_back(b);
    }
    return path;
}

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

std::uint32_t hash3(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    std::uint32_t h = a * 0x9E3779B1u ^ (b + 0x7F4A7C15u) * 0x85EBCA77u ^ (c + 0x165667B1u) * 0xC2B2AE3Du;
    h ^= h >> 15;
    h *= 0x2C1B3C6Du;
    h ^= h >> 12;
    h *= 0x297A2D39u;
    h ^= h >> 15;
    return h;
}

// Noise in [-1, 1] that is a pure function of its integer arguments.
double pixel_noise(std::uint32_t seed, int x, int y, int t) {
    return static_cast<double>(hash3(seed, static_cast<std::uint32_t>(x * 7919 + y), static_cast<std::uint32_t>(t))) /
               2147483647.5 - 1.0;
}

struct Wave {
    double fx, fy, phase;
    Color amplitude;
};

struct Background {
    Color base;
    std::array<Wave, 3> waves;
};

Background make_background(Rng& rng) {
    Background bg;
    bg.base = random_color(rng, 70, 150);
    for (Wave& w : bg.waves) {
        const double angle = rng.uniform(0, std::numbers::pi);
        const double freq = rng.uniform(0.02, 0.08);
        w = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0, 2 * std::numbers::pi),
             random_color(rng, 5, 30)};
    }
    return bg;
}

// Pattern drawn in box-relative coordinates so it scales with the box.
struct Pattern {
    int kind;  // 0 checker, 1 stripes, 2 rings
    int cells;
    Color a, b;
    double angle;
};

Pattern make_pattern(Rng& rng) {
    Pattern p;
    p.kind = static_cast<int>(rng.below(3));
    p.cells = 2 + static_cast<int>(rng.below(3));
    p.a = random_color(rng, 0, 255);
    p.b = random_color(rng, 0, 255);
    p.angle = rng.uniform(0, std::numbers::pi);
    return p;
}

const Color& pattern_color(const Pattern& p, double u, double v) {
    bool first = false;
    switch (p.kind) {
        case 0:
            first = (static_cast<int>(std::floor(u * p.cells)) + static_cast<int>(std::floor(v * p.cells))) % 2 == 0;
            break;
        case 1: {
            const double s = (u - 0.5) * std::cos(p.angle) + (v - 0.5) * std::sin(p.angle);
            first = static_cast<int>(std::floor((s + 1.0) * p.cells * 1.5)) % 2 == 0;
            break;
        }
        default: {
            const double r = std::hypot(u - 0.5, v - 0.5);
            first = static_cast<int>(std::floor(r * p.cells * 3.0)) % 2 == 0;
            break;
        }
    }
    return first ? p.a : p.b;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5); }

struct Shape {
    Pattern pattern;
    std::vector<Box> path;
};

void paint(Image& img, const Box& box, const Pattern& pattern) {
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x1())));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(box.x2())));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y1())));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(box.y2())));
    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        if (py < box.y1() || py >= box.y2()) continue;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            if (px < box.x1() || px >= box.x2()) continue;
            const Color& c = pattern_color(pattern, (px - box.x1()) / box.w, (py - box.y1()) / box.h);
            std::uint8_t* dst = img.pixel(x, y);
            for (int ch = 0; ch < 3; ++ch) dst[ch] = to_byte(c[ch]);
        }
    }
}

Image render_background(int size, const Background& bg) {
    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            Color c = bg.base;
            for (const Wave& w : bg.waves) {
                const double s = std::sin(w.fx * x + w.fy * y + w.phase);
                for (int ch = 0; ch < 3; ++ch) c[ch] += w.amplitude[ch] * s;
            }
            std::uint8_t* dst = img.pixel(x, y);
            for (int ch = 0; ch < 3; ++ch) dst[ch] = to_byte(c[ch]);
        }
    }
    return img;
}

Image render_frame(const Image& background, const std::vector<Shape>& distractors, const Shape& target, int t,
                   std::uint32_t noise_seed) {
    Image img = background;
    const int size = img.width;
    for (const Shape& d : distractors) paint(img, d.path[static_cast<std::size_t>(t)], d.pattern);
    paint(img, target.path[static_cast<std::size_t>(t)], target.pattern);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            std::uint8_t* dst = img.pixel(x, y);
            for (int ch = 0; ch < 3; ++ch) {
                const double v = dst[ch] + 6.0 * pixel_noise(noise_seed + static_cast<std::uint32_t>(ch), x, y, t);
                dst[ch] = to_byte(v);
            }
        }
    }
    return img;
}

Box random_box(Rng& rng, double min_size, double max_size, double max_aspect, int image_size) {
    const double side = rng.uniform(min_size, max_size);
    const double aspect = std::exp(rng.uniform(-std::log(max_aspect), std::log(max_aspect)));
    const double w = side * std::sqrt(aspect), h = side / std::sqrt(aspect);
    const double margin_x = w / 2 + 4, margin_y = h / 2 + 4;
    return {rng.uniform(margin_x, image_size - margin_x), rng.uniform(margin_y, image_size - margin_y), w, h};
}

}  // namespace

Dataset gen_synthetic(const SyntheticConfig& config) {
    config.validate();
    Dataset out;
    for (int s = 0; s < config.n_sequences; ++s) {
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(s)));
        SequenceRecord seq;
        char id[32];
        std::snprintf(id, sizeof id, "seq_%04d", s);
        seq.id = id;

        const Background bg = make_background(rng);
        Shape target;
        target.pattern = make_pattern(rng);
        const Box start = random_box(rng, config.min_size, config.max_size, 2.0, config.image_size);
        const double heading = rng.uniform(0, 2 * std::numbers::pi);
        target.path = make_trajectory(start, config.speed * std::cos(heading), config.speed * std::sin(heading),
                                      config.n_frames, config.motion, config.scale_drift, config.image_size, rng);

        std::vector<Shape> distractors(static_cast<std::size_t>(config.clutter));
        for (Shape& d : distractors) {
            d.pattern = make_pattern(rng);
            const Box b = random_box(rng, config.min_size * 0.6, config.max_size, 2.5, config.image_size);
            const double dh = rng.uniform(0, 2 * std::numbers::pi);
            const double ds = rng.uniform(0, config.speed);
            d.path = make_trajectory(b, ds * std::cos(dh), ds * std::sin(dh), config.n_frames,
                                     MotionKind::kConstantVelocity, 1.0, config.image_size, rng);
        }
        const auto noise_seed = static_cast<std::uint32_t>(rng.next());
        const Image background = render_background(config.image_size, bg);
        for (int t = 0; t < config.n_frames; ++t) {
            seq.frames.push_back(render_frame(background, distractors, target, t, noise_seed));
        }
        seq.gt = target.path;
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace igtrack
