#include "igtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "igtrack/errors.hpp"

namespace igtrack {

bool Box::valid() const {
    return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) && w > 0 &&
           h > 0;
}

bool RegressionDelta::finite() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dw) && std::isfinite(dh);
}

void require_valid(const Box& b, const char* what) {
    if (!b.valid()) {
        throw PreconditionError(std::string(what) + " must have finite fields and positive size (w=" +
                                std::to_string(b.w) + ", h=" + std::to_string(b.h) + ")");
    }
}

namespace {

// Area from edge coordinates, so identical boxes give inter == union exactly.
double edge_area(const Box& b) { return (b.x2() - b.x1()) * (b.y2() - b.y1()); }

}  // namespace

double iou(const Box& a, const Box& b) {
    require_valid(a, "iou: first box");
    require_valid(b, "iou: second box");
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = edge_area(a) + edge_area(b) - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

// Share of an edge of `a` that is the active edge of the intersection.
double edge_weight(double a_edge, double b_edge, bool lower_is_active) {
    if (a_edge == b_edge) return 0.5;
    return (lower_is_active ? a_edge < b_edge : a_edge > b_edge) ? 1.0 : 0.0;
}

}  // namespace

BoxGrad iou_gradient(const Box& a, const Box& b) {
    require_valid(a, "iou_gradient: first box");
    require_valid(b, "iou_gradient: second box");
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (iw <= 0 || ih <= 0) return {0, 0, 0, 0};

    const double sx2 = edge_weight(a.x2(), b.x2(), true);
    const double sx1 = edge_weight(a.x1(), b.x1(), false);
    const double sy2 = edge_weight(a.y2(), b.y2(), true);
    const double sy1 = edge_weight(a.y1(), b.y1(), false);

    const double inter = iw * ih;
    const double uni = edge_area(a) + edge_area(b) - inter;
    const double d_inter = (uni + inter) / (uni * uni);
    const double d_area = -inter / (uni * uni);

    const BoxGrad di = {ih * (sx2 - sx1), iw * (sy2 - sy1), ih * (sx2 + sx1) / 2, iw * (sy2 + sy1) / 2};
    return {di[0] * d_inter, di[1] * d_inter, di[2] * d_inter + a.h * d_area,
            di[3] * d_inter + a.w * d_area};
}

RegressionDelta encode(const Box& anchor, const Box& target) {
    require_valid(anchor, "encode: anchor");
    require_valid(target, "encode: target");
    return {(target.cx - anchor.cx) / anchor.w, (target.cy - anchor.cy) / anchor.h,
            std::log(target.w / anchor.w), std::log(target.h / anchor.h)};
}

Box decode(const Box& anchor, const RegressionDelta& delta, bool* clamped) {
    require_valid(anchor, "decode: anchor");
    if (!delta.finite()) throw PreconditionError("decode: delta must be finite");
    const double dw = std::clamp(delta.dw, -kDeltaClamp, kDeltaClamp);
    const double dh = std::clamp(delta.dh, -kDeltaClamp, kDeltaClamp);
    if (clamped) *clamped = dw != delta.dw || dh != delta.dh;
    return {anchor.cx + delta.dx * anchor.w, anchor.cy + delta.dy * anchor.h, anchor.w * std::exp(dw),
            anchor.h * std::exp(dh)};
}

namespace {

struct Interval {
    double lo, hi;
    double dlo, dhi;  // derivative of each clipped end w.r.t. its unclipped value
    bool degenerate;
};

Interval clip_interval(double lo, double hi, double limit) {
    Interval r{std::clamp(lo, 0.0, limit), std::clamp(hi, 0.0, limit), 0, 0, false};
    r.dlo = (lo > 0 && lo < limit) ? 1.0 : 0.0;
    r.dhi = (hi > 0 && hi < limit) ? 1.0 : 0.0;
    if (r.hi - r.lo < 1.0) {
        const double mid = (r.lo + r.hi) / 2;
        r.lo = std::clamp(mid - 0.5, 0.0, limit - 1.0);
        r.hi = r.lo + 1.0;
        r.dlo = r.dhi = 0;
        r.degenerate = true;
    }
    return r;
}

}  // namespace

ClipResult clip_box_with_jacobian(const Box& b, double width, double height) {
    require_valid(b, "clip_box: box");
    if (!(width >= 1) || !(height >= 1)) throw PreconditionError("clip_box: image must be at least 1x1");
    const Interval x = clip_interval(b.x1(), b.x2(), width);
    const Interval y = clip_interval(b.y1(), b.y2(), height);

    ClipResult r;
    r.box = Box::from_corners(x.lo, y.lo, x.hi, y.hi);
    // Untouched axes keep their exact center/size rather than a corner round trip.
    if (x.lo == b.x1() && x.hi == b.x2()) {
        r.box.cx = b.cx;
        r.box.w = b.w;
    }
    if (y.lo == b.y1() && y.hi == b.y2()) {
        r.box.cy = b.cy;
        r.box.h = b.h;
    }
    r.degenerate = x.degenerate || y.degenerate;
    // x1 = cx - w/2, x2 = cx + w/2; cx' = (x1' + x2')/2, w' = x2' - x1'.
    auto& j = r.jacobian;
    j[0 * 4 + 0] = (x.dlo + x.dhi) / 2;
    j[0 * 4 + 2] = (x.dhi - x.dlo) / 4;
    j[2 * 4 + 0] = x.dhi - x.dlo;
    j[2 * 4 + 2] = (x.dhi + x.dlo) / 2;
    j[1 * 4 + 1] = (y.dlo + y.dhi) / 2;
    j[1 * 4 + 3] = (y.dhi - y.dlo) / 4;
    j[3 * 4 + 1] = y.dhi - y.dlo;
    j[3 * 4 + 3] = (y.dhi + y.dlo) / 2;
    return r;
}

Box clip_box(const Box& b, double width, double height, bool* degenerate) {
    ClipResult r = clip_box_with_jacobian(b, width, height);
    if (degenerate) *degenerate = r.degenerate;
    return r.box;
}

}  // namespace igtrack
