#pragma once

#include <array>

namespace igtrack {

struct Corners {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

/// Axis-aligned box in pixels, center parameterization. Corner form is only a
/// conversion; all arithmetic in the library is written against (cx, cy, w, h).
struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;

    static Box from_corners(double x1, double y1, double x2, double y2) {
        return {(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
    }
    /// Top-left corner plus size, the on-disk annotation layout.
    static Box from_xywh(double x, double y, double w, double h) {
        return {x + w / 2, y + h / 2, w, h};
    }

    double x1() const { return cx - w / 2; }
    double y1() const { return cy - h / 2; }
    double x2() const { return cx + w / 2; }
    double y2() const { return cy + h / 2; }
    Corners corners() const { return {x1(), y1(), x2(), y2()}; }
    double area() const { return w * h; }

    bool valid() const;
    Box shifted(double dx, double dy) const { return {cx + dx, cy + dy, w, h}; }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Transformed-domain regression target relative to an anchor.
struct RegressionDelta {
    double dx = 0, dy = 0, dw = 0, dh = 0;

    bool finite() const;
    friend bool operator==(const RegressionDelta&, const RegressionDelta&) = default;
};

/// Gradient with respect to (cx, cy, w, h).
using BoxGrad = std::array<double, 4>;

/// Largest |dw|, |dh| accepted by decode before clamping.
inline constexpr double kDeltaClamp = 4.0;

/// Throws PreconditionError unless w, h are positive and all fields finite.
void require_valid(const Box& b, const char* what = "box");

double iou(const Box& a, const Box& b);

/// d iou(a, b) / d(a.cx, a.cy, a.w, a.h). Zero for disjoint or edge-touching
/// boxes. Where an edge of `a` coincides with an edge of `b` the two one-sided
/// derivatives are averaged, so iou(a, a) has an exactly zero gradient.
BoxGrad iou_gradient(const Box& a, const Box& b);

RegressionDelta encode(const Box& anchor, const Box& target);

/// Inverse of encode. |dw| and |dh| are clamped to kDeltaClamp; `clamped` is
/// set when that happened.
Box decode(const Box& anchor, const RegressionDelta& delta, bool* clamped = nullptr);

/// Row-major 4x4 Jacobian d(out cx, cy, w, h) / d(in cx, cy, w, h).
using BoxJacobian = std::array<double, 16>;

struct ClipResult {
    Box box;
    BoxJacobian jacobian{};
    bool degenerate = false;  // minimum side length had to be enforced
};

/// Clip into [0, width] x [0, height] in corner form, keeping at least one
/// pixel per side. A box entirely outside collapses to a 1x1 box at the
/// nearest boundary point and is reported as degenerate.
ClipResult clip_box_with_jacobian(const Box& b, double width, double height);
Box clip_box(const Box& b, double width, double height, bool* degenerate = nullptr);

}  // namespace igtrack
