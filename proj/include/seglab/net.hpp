#pragma once

// Compact fully-convolutional segmenter with manual forward/backward passes:
//   conv3x3(1 -> 8) + ReLU, conv3x3(8 -> 8) + ReLU, conv1x1(8 -> |K|)
// All layers use zero same-padding, so the logit map has the image's grid.
// The image is mapped from [0, 1] to [-1, 1] before the first layer.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "seglab/grid.hpp"
#include "seglab/kernels.hpp"

namespace seglab {

struct ConvLayer {
    int in_channels;
    int out_channels;
    int kernel;
    bool relu;
    std::size_t weight_offset;  // into the flat parameter vector
    std::size_t bias_offset;

    std::size_t weight_count() const
    {
        return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    }
    ConvGeometry geometry(int height, int width) const { return {in_channels, out_channels, kernel, height, width}; }
};

class SegNet {
public:
    static constexpr int kHiddenChannels = 8;

    // Zero-initialized parameters.
    explicit SegNet(ClassSet classes);
    // He-normal weights (std = sqrt(2 / fan_in)), zero biases.
    static SegNet he_initialized(ClassSet classes, std::uint64_t seed);

    SegNet(const SegNet& other);
    SegNet& operator=(const SegNet& other);
    SegNet(SegNet&&) noexcept = default;
    SegNet& operator=(SegNet&&) noexcept = default;

    const ClassSet& classes() const { return classes_; }
    const std::vector<ConvLayer>& layers() const { return layers_; }
    std::size_t parameter_count() const { return params_.size(); }

    // Flattened theta: per layer, weights [out][in][kh][kw] then biases.
    std::span<const double> parameters() const { return params_; }
    // Any write access invalidates outstanding forward caches.
    std::span<double> mutable_parameters();
    void set_parameters(std::span<const double> theta);

    // Changes whenever the parameters may have changed; caches record it.
    std::uint64_t stamp() const { return stamp_; }

private:
    ClassSet classes_;
    std::vector<ConvLayer> layers_;
    std::vector<double> params_;
    std::uint64_t stamp_;
};

struct ForwardCache {
    std::uint64_t net_stamp = 0;
    int height = 0;
    int width = 0;
    // activations[l] is the input of layer l; activations[0] is the centered image.
    std::vector<std::vector<double>> activations;
    // Pre-ReLU outputs of layers with activation (empty for the last layer).
    std::vector<std::vector<double>> pre_activations;
};

struct ForwardResult {
    LogitMap logits;
    ForwardCache cache;
};

// Throws DimensionError unless the image is 2-D.
ForwardResult forward(const SegNet& net, const Image& image);

// True when every ReLU is on the same side of zero in both caches. Finite
// differences on theta are only meaningful between such states.
bool same_relu_pattern(const ForwardCache& a, const ForwardCache& b);

// Per-pixel softmax with max-shift.
ProbabilityMap softmax(const LogitMap& z);

// dL/dz_j = s_j (dL/ds_j - sum_k s_k dL/ds_k), per pixel.
LogitMap softmax_backward(const ProbabilityMap& s, const GradientMap& dl_ds);

// Gradient of the loss w.r.t. theta, laid out like SegNet::parameters().
// Throws ContractError when the cache was produced by a different parameter state.
std::vector<double> backward(const SegNet& net, const ForwardCache& cache, const LogitMap& dl_dz);

// Checkpoint layout (all integers little-endian):
//   bytes 0..7    magic "SEGLABCK"
//   bytes 8..15   uint64 header length N
//   next N bytes  UTF-8 JSON header: {"architecture": .., "classes": K, "parameter_count": P, ...}
//   next 8*P      float64 parameters in SegNet::parameters() order
void save_checkpoint(const std::filesystem::path& path, const SegNet& net, nlohmann::ordered_json header);

struct Checkpoint {
    SegNet net;
    nlohmann::ordered_json header;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seglab
