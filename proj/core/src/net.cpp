#include "igtrack/net.hpp"

#include <cmath>
#include <string>

#include "igtrack/errors.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {

int NetConfig::feature_size(int input_size) const {
    int n = input_size;
    for (const ConvSpec& c : backbone) n = (n - c.kernel) / c.stride + 1;
    return n;
}

int NetConfig::total_stride() const {
    int s = 1;
    for (const ConvSpec& c : backbone) s *= c.stride;
    return s;
}

void NetConfig::validate() const {
    if (in_channels < 1 || head_hidden < 1 || anchors_per_cell < 1) {
        throw ConfigError("net config: channel counts must be positive");
    }
    if (backbone.empty()) throw ConfigError("net config: backbone needs at least one convolution");
    int t = template_size, s = search_size;
    for (const ConvSpec& c : backbone) {
        if (c.kernel < 1 || c.stride < 1 || c.out_channels < 1) throw ConfigError("net config: bad conv layer");
        if (t < c.kernel || s < c.kernel) throw ConfigError("net config: kernel larger than its input");
        t = (t - c.kernel) / c.stride + 1;
        s = (s - c.kernel) / c.stride + 1;
    }
    if (s < t) throw ConfigError("net config: search features smaller than template features");
}

NetConfig NetConfig::reduced() {
    NetConfig c;
    c.backbone = {{5, 2, 4}, {4, 2, 4}};
    c.head_hidden = 4;
    c.template_size = 39;
    c.search_size = 55;
    return c;
}

AnchorSpec anchor_spec_for(const NetConfig& config) {
    AnchorSpec spec;
    if (spec.ratios.size() != static_cast<std::size_t>(config.anchors_per_cell)) {
        throw ConfigError("net config: anchors_per_cell must match the anchor ratio count (" +
                          std::to_string(spec.ratios.size()) + ")");
    }
    spec.stride = config.total_stride();
    spec.response_size = config.response_size();
    spec.base_size = 64.0 * config.template_size / 127.0;
    return spec;
}

double init_weight_limit(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

namespace {

// Regression outputs start two orders of magnitude quieter so untrained deltas
// stay near the anchors.
constexpr double kRegOutputGain = 0.01;

// Patches are in [0, 1]; the first conv sees them centred on this value.
constexpr double kInputMean = 0.5;

template <class T>
BasicTensor<T> uniform_weights(std::vector<std::size_t> dims, double limit, Rng& rng) {
    BasicTensor<T> t(std::move(dims));
    for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
    return t;
}

template <class T>
void add_conv(BasicParamStore<T>& store, const std::string& name, std::size_t out, std::size_t in,
              std::size_t k, double gain, Rng& rng) {
    const std::size_t fan_in = in * k * k;
    store.add(name + ".weight", uniform_weights<T>({out, in, k, k}, gain * init_weight_limit(fan_in), rng));
    store.add(name + ".bias", BasicTensor<T>({out}));
}

// ---- kernels ---------------------------------------------------------------

// Column-phase split for strided access: phase p of row r holds in[r][j*s + p]
// for consecutive j, so every strided read becomes a contiguous one.
template <class T>
struct Phased {
    std::size_t C, H, s, Wp;
    std::vector<T> data;

    Phased(std::size_t c, std::size_t h, std::size_t w, std::size_t stride)
        : C(c), H(h), s(stride), Wp((w + stride - 1) / stride), data(c * h * stride * Wp, T(0)) {}

    T* row(std::size_t c, std::size_t y, std::size_t phase) { return data.data() + ((c * H + y) * s + phase) * Wp; }
    const T* row(std::size_t c, std::size_t y, std::size_t phase) const {
        return data.data() + ((c * H + y) * s + phase) * Wp;
    }
};

template <class T>
Phased<T> phase_split(const BasicTensor<T>& in, std::size_t s) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Phased<T> p(C, H, W, s);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            const T* src = in.data() + (c * H + y) * W;
            for (std::size_t x = 0; x < W; ++x) p.row(c, y, x % s)[x / s] = src[x];
        }
    }
    return p;
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += a[i] * b[i];
        a1 += a[i + 1] * b[i + 1];
        a2 += a[i + 2] * b[i + 2];
        a3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) a0 += a[i] * b[i];
    return (a0 + a1) + (a2 + a3);
}

template <class T>
BasicTensor<T> conv(const BasicTensor<T>& in, const BasicTensor<T>& w, const BasicTensor<T>& b, int stride) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const std::size_t O = w.dim(0), k = w.dim(2);
    if (w.dim(1) != C) throw ConfigError("conv: channel mismatch");
    const std::size_t s = static_cast<std::size_t>(stride);
    const std::size_t Ho = (H - k) / s + 1, Wo = (W - k) / s + 1;
    const Phased<T> src = phase_split(in, s);
    BasicTensor<T> out({O, Ho, Wo});
    for (std::size_t o = 0; o < O; ++o) {
        T* plane = out.data() + o * Ho * Wo;
        for (std::size_t i = 0; i < Ho * Wo; ++i) plane[i] = b[o];
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const T wv = w[((o * C + c) * k + ky) * k + kx];
                    for (std::size_t y = 0; y < Ho; ++y) {
                        const T* row = src.row(c, y * s + ky, kx % s) + kx / s;
                        T* dst = plane + y * Wo;
                        for (std::size_t x = 0; x < Wo; ++x) dst[x] += wv * row[x];
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients; fills d_in when requested.
template <class T>
void conv_backward(const BasicTensor<T>& in, const BasicTensor<T>& w, int stride, const BasicTensor<T>& d_out,
                   BasicTensor<T>& d_w, BasicTensor<T>& d_b, BasicTensor<T>* d_in) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const std::size_t O = w.dim(0), k = w.dim(2);
    const std::size_t s = static_cast<std::size_t>(stride);
    const std::size_t Ho = d_out.dim(1), Wo = d_out.dim(2);
    const Phased<T> src = phase_split(in, s);
    Phased<T> d_src(d_in ? C : 0, H, W, s);
    for (std::size_t o = 0; o < O; ++o) {
        const T* g = d_out.data() + o * Ho * Wo;
        T bias_sum = 0;
        for (std::size_t i = 0; i < Ho * Wo; ++i) bias_sum += g[i];
        d_b[o] += bias_sum;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::size_t wi = ((o * C + c) * k + ky) * k + kx;
                    const T wv = w[wi];
                    T acc = 0;
                    for (std::size_t y = 0; y < Ho; ++y) {
                        const T* grow = g + y * Wo;
                        acc += dot(grow, src.row(c, y * s + ky, kx % s) + kx / s, Wo);
                        if (d_in) {
                            T* dst = d_src.row(c, y * s + ky, kx % s) + kx / s;
                            for (std::size_t x = 0; x < Wo; ++x) dst[x] += wv * grow[x];
                        }
                    }
                    d_w[wi] += acc;
                }
            }
        }
    }
    if (d_in) {
        *d_in = BasicTensor<T>(in.dims());
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; ++y) {
                T* dst = d_in->data() + (c * H + y) * W;
                for (std::size_t x = 0; x < W; ++x) dst[x] = d_src.row(c, y, x % s)[x / s];
            }
        }
    }
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    BasicTensor<T> y = x;
    for (T& v : y.values()) v = v > T(0) ? v : T(0);
    return y;
}

template <class T>
void relu_backward(const BasicTensor<T>& pre, BasicTensor<T>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > T(0))) grad[i] = T(0);
    }
}

// Per-channel correlation of search features with template features, averaged
// over the template footprint.
template <class T>
BasicTensor<T> xcorr_depthwise(const BasicTensor<T>& search, const BasicTensor<T>& kernel) {
    const std::size_t C = search.dim(0), S = search.dim(1), K = kernel.dim(1);
    if (kernel.dim(0) != C) throw ConfigError("xcorr: channel mismatch");
    const std::size_t R = S - K + 1;
    const T scale = T(1) / static_cast<T>(K * K);
    BasicTensor<T> out({C, R, R});
    for (std::size_t c = 0; c < C; ++c) {
        T* plane = out.data() + c * R * R;
        for (std::size_t u = 0; u < K; ++u) {
            for (std::size_t v = 0; v < K; ++v) {
                const T kv = kernel.at(c, u, v);
                for (std::size_t i = 0; i < R; ++i) {
                    const T* src = search.data() + (c * S + i + u) * S + v;
                    T* dst = plane + i * R;
                    for (std::size_t j = 0; j < R; ++j) dst[j] += kv * src[j];
                }
            }
        }
        for (std::size_t i = 0; i < R * R; ++i) plane[i] *= scale;
    }
    return out;
}

template <class T>
void xcorr_backward(const BasicTensor<T>& search, const BasicTensor<T>& kernel, const BasicTensor<T>& d_out,
                    BasicTensor<T>& d_search, BasicTensor<T>& d_kernel) {
    const std::size_t C = search.dim(0), S = search.dim(1), K = kernel.dim(1);
    const std::size_t R = S - K + 1;
    const T scale = T(1) / static_cast<T>(K * K);
    d_search = BasicTensor<T>(search.dims());
    d_kernel = BasicTensor<T>(kernel.dims());
    std::vector<T> g(R * R);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < R * R; ++i) g[i] = d_out[c * R * R + i] * scale;
        for (std::size_t u = 0; u < K; ++u) {
            for (std::size_t v = 0; v < K; ++v) {
                const T kv = kernel.at(c, u, v);
                T acc = 0;
                for (std::size_t i = 0; i < R; ++i) {
                    const T* src = search.data() + (c * S + i + u) * S + v;
                    T* dst = d_search.data() + (c * S + i + u) * S + v;
                    const T* grow = g.data() + i * R;
                    for (std::size_t j = 0; j < R; ++j) {
                        acc += grow[j] * src[j];
                        dst[j] += kv * grow[j];
                    }
                }
                d_kernel.at(c, u, v) += acc;
            }
        }
    }
}

std::string conv_name(std::size_t layer) { return "backbone.conv" + std::to_string(layer + 1); }

void check_patch(const NetConfig& config, std::size_t channels, std::size_t h, std::size_t w, int expected,
                 const char* what) {
    if (channels != static_cast<std::size_t>(config.in_channels) || h != static_cast<std::size_t>(expected) ||
        w != static_cast<std::size_t>(expected)) {
        throw ConfigError(std::string(what) + " patch has the wrong shape for this net config");
    }
}

template <class T>
void check_patch(const NetConfig& config, const BasicTensor<T>& patch, int expected, const char* what) {
    if (patch.rank() != 3) throw ConfigError(std::string(what) + " patch must be rank 3");
    check_patch(config, patch.dim(0), patch.dim(1), patch.dim(2), expected, what);
}

// Runs the backbone, recording each conv output before its ReLU.
template <class T>
BasicTensor<T> run_backbone(const BasicParamStore<T>& params, const NetConfig& config, const BasicTensor<T>& input,
                            std::vector<BasicTensor<T>>* pre) {
    BasicTensor<T> x = input;
    for (T& v : x.values()) v -= static_cast<T>(kInputMean);
    const std::size_t n = config.backbone.size();
    for (std::size_t l = 0; l < n; ++l) {
        const std::string name = conv_name(l);
        BasicTensor<T> y = conv(x, params.at(name + ".weight"), params.at(name + ".bias"), config.backbone[l].stride);
        if (pre) pre->push_back(y);
        if (l + 1 == n) return y;
        x = relu(y);
    }
    return x;
}

template <class T>
HeadOutput<T> run_heads(const BasicParamStore<T>& params, const BasicTensor<T>& xc, BasicTensor<T>* cls_pre,
                        BasicTensor<T>* reg_pre) {
    HeadOutput<T> out;
    BasicTensor<T> ch = conv(xc, params.at("head.cls.hidden.weight"), params.at("head.cls.hidden.bias"), 1);
    out.cls = conv(relu(ch), params.at("head.cls.out.weight"), params.at("head.cls.out.bias"), 1);
    BasicTensor<T> rh = conv(xc, params.at("head.reg.hidden.weight"), params.at("head.reg.hidden.bias"), 1);
    out.reg = conv(relu(rh), params.at("head.reg.out.weight"), params.at("head.reg.out.bias"), 1);
    if (cls_pre) *cls_pre = std::move(ch);
    if (reg_pre) *reg_pre = std::move(rh);
    return out;
}

// Backprop through the backbone; `d_top` is the gradient at the last conv output.
template <class T>
void backbone_backward(const BasicParamStore<T>& params, const NetConfig& config, const BasicTensor<T>& input,
                       const std::vector<BasicTensor<T>>& pre, BasicTensor<T> d_top, BasicParamStore<T>& grads) {
    for (std::size_t l = config.backbone.size(); l-- > 0;) {
        const std::string name = conv_name(l);
        BasicTensor<T> layer_in = l == 0 ? input : relu(pre[l - 1]);
        if (l == 0) {
            for (T& v : layer_in.values()) v -= static_cast<T>(kInputMean);
        }
        BasicTensor<T> d_in;
        conv_backward(layer_in, params.at(name + ".weight"), config.backbone[l].stride, d_top,
                      grads.at(name + ".weight"), grads.at(name + ".bias"), l == 0 ? nullptr : &d_in);
        if (l == 0) break;
        relu_backward(pre[l - 1], d_in);
        d_top = std::move(d_in);
    }
}

template <class T>
void head_backward(const BasicParamStore<T>& params, const std::string& head, const BasicTensor<T>& xc,
                   const BasicTensor<T>& hidden_pre, const BasicTensor<T>& d_out, BasicParamStore<T>& grads,
                   BasicTensor<T>& d_xc) {
    BasicTensor<T> d_hidden;
    conv_backward(relu(hidden_pre), params.at(head + ".out.weight"), 1, d_out, grads.at(head + ".out.weight"),
                  grads.at(head + ".out.bias"), &d_hidden);
    relu_backward(hidden_pre, d_hidden);
    BasicTensor<T> d_in;
    conv_backward(xc, params.at(head + ".hidden.weight"), 1, d_hidden, grads.at(head + ".hidden.weight"),
                  grads.at(head + ".hidden.bias"), &d_in);
    for (std::size_t i = 0; i < d_xc.size(); ++i) d_xc[i] += d_in[i];
}

template <class T>
void append_signature(std::vector<bool>& sig, const BasicTensor<T>& pre) {
    for (T v : pre.values()) sig.push_back(v > T(0));
}

}  // namespace

template <class T>
BasicParamStore<T> init_params(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    BasicParamStore<T> store;
    std::size_t in = static_cast<std::size_t>(config.in_channels);
    for (std::size_t l = 0; l < config.backbone.size(); ++l) {
        const ConvSpec& c = config.backbone[l];
        add_conv(store, conv_name(l), static_cast<std::size_t>(c.out_channels), in, static_cast<std::size_t>(c.kernel),
                 1.0, rng);
        in = static_cast<std::size_t>(c.out_channels);
    }
    const std::size_t hidden = static_cast<std::size_t>(config.head_hidden);
    const std::size_t k = static_cast<std::size_t>(config.anchors_per_cell);
    add_conv(store, "head.cls.hidden", hidden, in, 1, 1.0, rng);
    add_conv(store, "head.cls.out", 2 * k, hidden, 1, 1.0, rng);
    add_conv(store, "head.reg.hidden", hidden, in, 1, 1.0, rng);
    add_conv(store, "head.reg.out", 4 * k, hidden, 1, kRegOutputGain, rng);
    store.add("motion.weight", BasicTensor<T>({4, 6}));
    store.add("motion.bias", BasicTensor<T>({4}));
    return store;
}

template <class T>
std::vector<bool> Tape<T>::relu_signature() const {
    std::vector<bool> sig;
    for (std::size_t l = 0; l + 1 < template_pre.size(); ++l) append_signature(sig, template_pre[l]);
    for (std::size_t l = 0; l + 1 < search_pre.size(); ++l) append_signature(sig, search_pre[l]);
    append_signature(sig, cls_hidden_pre);
    append_signature(sig, reg_hidden_pre);
    return sig;
}

template <class T>
ForwardResult<T> forward(const BasicParamStore<T>& params, const NetConfig& config,
                         const BasicTensor<T>& template_patch, const BasicTensor<T>& search_patch) {
    check_patch(config, template_patch, config.template_size, "template");
    check_patch(config, search_patch, config.search_size, "search");
    ForwardResult<T> r;
    Tape<T>& tape = r.tape;
    tape.params = &params;
    tape.config = config;
    tape.template_input = template_patch;
    tape.search_input = search_patch;
    const BasicTensor<T> tf = run_backbone(params, config, template_patch, &tape.template_pre);
    const BasicTensor<T> sf = run_backbone(params, config, search_patch, &tape.search_pre);
    tape.xcorr = xcorr_depthwise(sf, tf);
    HeadOutput<T> heads = run_heads(params, tape.xcorr, &tape.cls_hidden_pre, &tape.reg_hidden_pre);
    r.cls = std::move(heads.cls);
    r.reg = std::move(heads.reg);
    return r;
}

template <class T>
BasicTensor<T> embed_template(const BasicParamStore<T>& params, const NetConfig& config,
                              const BasicTensor<T>& template_patch) {
    check_patch(config, template_patch, config.template_size, "template");
    return run_backbone<T>(params, config, template_patch, nullptr);
}

template <class T>
HeadOutput<T> forward_search(const BasicParamStore<T>& params, const NetConfig& config,
                             const BasicTensor<T>& template_features, const BasicTensor<T>& search_patch) {
    check_patch(config, search_patch, config.search_size, "search");
    const BasicTensor<T> sf = run_backbone<T>(params, config, search_patch, nullptr);
    return run_heads<T>(params, xcorr_depthwise(sf, template_features), nullptr, nullptr);
}

template <class T>
BasicParamStore<T> backward(Tape<T>& tape, const BasicTensor<T>& d_cls, const BasicTensor<T>& d_reg) {
    if (tape.consumed) throw UsageError("backward: tape was already consumed");
    if (!tape.params) throw UsageError("backward: tape was not produced by forward");
    tape.consumed = true;
    const BasicParamStore<T>& params = *tape.params;
    const NetConfig& config = tape.config;
    const std::size_t k = static_cast<std::size_t>(config.anchors_per_cell);
    const std::size_t R = tape.xcorr.dim(1);
    if (d_cls.dims() != std::vector<std::size_t>{2 * k, R, R} || d_reg.dims() != std::vector<std::size_t>{4 * k, R, R}) {
        throw ConfigError("backward: upstream gradient shapes do not match the heads");
    }

    BasicParamStore<T> grads = params.zeros_like();
    BasicTensor<T> d_xc(tape.xcorr.dims());
    head_backward(params, "head.cls", tape.xcorr, tape.cls_hidden_pre, d_cls, grads, d_xc);
    head_backward(params, "head.reg", tape.xcorr, tape.reg_hidden_pre, d_reg, grads, d_xc);

    BasicTensor<T> d_sf, d_tf;
    xcorr_backward(tape.search_pre.back(), tape.template_pre.back(), d_xc, d_sf, d_tf);
    backbone_backward(params, config, tape.template_input, tape.template_pre, std::move(d_tf), grads);
    backbone_backward(params, config, tape.search_input, tape.search_pre, std::move(d_sf), grads);
    return grads;
}

#define IGTRACK_INSTANTIATE_NET(T)                                                                              \
    template BasicParamStore<T> init_params<T>(const NetConfig&, std::uint64_t);                               \
    template struct Tape<T>;                                                                                    \
    template ForwardResult<T> forward<T>(const BasicParamStore<T>&, const NetConfig&, const BasicTensor<T>&,   \
                                         const BasicTensor<T>&);                                               \
    template BasicTensor<T> embed_template<T>(const BasicParamStore<T>&, const NetConfig&,                     \
                                              const BasicTensor<T>&);                                          \
    template HeadOutput<T> forward_search<T>(const BasicParamStore<T>&, const NetConfig&, const BasicTensor<T>&, \
                                             const BasicTensor<T>&);                                           \
    template BasicParamStore<T> backward<T>(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);

IGTRACK_INSTANTIATE_NET(float)
IGTRACK_INSTANTIATE_NET(double)

}  // namespace igtrack
