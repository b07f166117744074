#pragma once

#include <cstdint>
#include <vector>

#include "igtrack/anchors.hpp"
#include "igtrack/param_store.hpp"
#include "igtrack/tensor.hpp"

namespace igtrack {

/// One valid (unpadded) convolution of the backbone.
struct ConvSpec {
    int kernel = 3;
    int stride = 2;
    int out_channels = 8;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct NetConfig {
    int in_channels = 3;
    std::vector<ConvSpec> backbone{{3, 2, 8}, {3, 2, 8}, {21, 2, 16}};
    int head_hidden = 16;
    int template_size = 127;
    int search_size = 255;
    int anchors_per_cell = 5;

    int feature_size(int input_size) const;
    int template_feature() const { return feature_size(template_size); }
    int search_feature() const { return feature_size(search_size); }
    int response_size() const { return search_feature() - template_feature() + 1; }
    int total_stride() const;
    int feature_channels() const { return backbone.back().out_channels; }

    /// Throws ConfigError when the layer arithmetic does not produce a
    /// positive response map.
    void validate() const;

    /// 127 -> 6x6 template features, 255 -> 22x22 search features, 17x17 response.
    static NetConfig standard() { return {}; }
    /// 39 / 55 inputs, two convolutions; used for gradient checking.
    static NetConfig reduced();

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Anchors matching the response map of `config`; the base size scales with
/// the template so that a context-cropped target roughly fills one anchor.
AnchorSpec anchor_spec_for(const NetConfig& config);

/// Deterministic initialization: uniform fan-in scaling for every convolution,
/// zero biases, and a zero motion block (identity motion estimate).
template <class T>
BasicParamStore<T> init_params(const NetConfig& config, std::uint64_t seed);

/// Upper bound on |w| used by init_params for a layer with this fan-in.
double init_weight_limit(std::size_t fan_in);

/// Everything backward() needs to replay a forward pass exactly.
template <class T>
struct Tape {
    const BasicParamStore<T>* params = nullptr;
    NetConfig config;
    BasicTensor<T> template_input, search_input;
    std::vector<BasicTensor<T>> template_pre, search_pre;  // conv outputs before ReLU
    BasicTensor<T> xcorr;
    BasicTensor<T> cls_hidden_pre, reg_hidden_pre;
    bool consumed = false;

    /// Active/inactive state of every ReLU; two passes with equal signatures
    /// lie on the same linear piece of the network.
    std::vector<bool> relu_signature() const;
};

template <class T>
struct HeadOutput {
    BasicTensor<T> cls;  // 2k x R x R: (background, foreground) logits per anchor ratio
    BasicTensor<T> reg;  // 4k x R x R: (dx, dy, dw, dh) per anchor ratio
};

template <class T>
struct ForwardResult {
    BasicTensor<T> cls;
    BasicTensor<T> reg;
    Tape<T> tape;
};

/// Shared backbone on both patches, depthwise cross-correlation, then the
/// classification and regression heads (1x1 conv, ReLU, 1x1 conv each).
template <class T>
ForwardResult<T> forward(const BasicParamStore<T>& params, const NetConfig& config,
                         const BasicTensor<T>& template_patch, const BasicTensor<T>& search_patch);

/// Backbone features of a template patch (cached by the tracker).
template <class T>
BasicTensor<T> embed_template(const BasicParamStore<T>& params, const NetConfig& config,
                              const BasicTensor<T>& template_patch);

/// Search branch against cached template features; bit-identical to forward().
template <class T>
HeadOutput<T> forward_search(const BasicParamStore<T>& params, const NetConfig& config,
                             const BasicTensor<T>& template_features, const BasicTensor<T>& search_patch);

/// Reverse-mode gradients for every parameter (motion block entries are zero;
/// the IOU module contributes those). Marks the tape consumed.
template <class T>
BasicParamStore<T> backward(Tape<T>& tape, const BasicTensor<T>& d_cls, const BasicTensor<T>& d_reg);

/// Parameter-name prefixes used to report gradient checks by group.
inline constexpr const char* kParamGroups[] = {"backbone", "head.cls", "head.reg", "motion"};

}  // namespace igtrack
