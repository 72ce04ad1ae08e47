#include "seglab/net.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>

#include "seglab/rng.hpp"

namespace seglab {

namespace {

std::uint64_t next_stamp()
{
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

constexpr char kMagic[8] = {'S', 'E', 'G', 'L', 'A', 'B', 'C', 'K'};

}  // namespace

SegNet::SegNet(ClassSet classes) : classes_(classes), stamp_(next_stamp())
{
    const int shapes[3][4] = {
        {1, kHiddenChannels, 3, 1},
        {kHiddenChannels, kHiddenChannels, 3, 1},
        {kHiddenChannels, classes.total(), 1, 0},
    };
    std::size_t offset = 0;
    for (const auto& s : shapes) {
        ConvLayer layer{s[0], s[1], s[2], s[3] != 0, 0, 0};
        layer.weight_offset = offset;
        offset += layer.weight_count();
        layer.bias_offset = offset;
        offset += static_cast<std::size_t>(layer.out_channels);
        layers_.push_back(layer);
    }
    params_.assign(offset, 0.0);
}

SegNet SegNet::he_initialized(ClassSet classes, std::uint64_t seed)
{
    SegNet net(classes);
    Rng rng(seed);
    for (const ConvLayer& layer : net.layers_) {
        const double fan_in = static_cast<double>(layer.in_channels) * layer.kernel * layer.kernel;
        const double sigma = std::sqrt(2.0 / fan_in);
        for (std::size_t j = 0; j < layer.weight_count(); ++j) {
            net.params_[layer.weight_offset + j] = rng.normal(0.0, sigma);
        }
    }
    return net;
}

SegNet::SegNet(const SegNet& other)
    : classes_(other.classes_), layers_(other.layers_), params_(other.params_), stamp_(next_stamp())
{
}

SegNet& SegNet::operator=(const SegNet& other)
{
    if (this != &other) {
        classes_ = other.classes_;
        layers_ = other.layers_;
        params_ = other.params_;
        stamp_ = next_stamp();
    }
    return *this;
}

std::span<double> SegNet::mutable_parameters()
{
    stamp_ = next_stamp();
    return params_;
}

void SegNet::set_parameters(std::span<const double> theta)
{
    if (theta.size() != params_.size()) {
        throw DimensionError("set_parameters: expected " + std::to_string(params_.size()) + " values, got " +
                             std::to_string(theta.size()));
    }
    std::copy(theta.begin(), theta.end(), params_.begin());
    stamp_ = next_stamp();
}

ForwardResult forward(const SegNet& net, const Image& image)
{
    if (image.shape.rank() != 2) {
        throw DimensionError("forward: the segmenter expects a 2-D image, got " + image.shape.to_string());
    }
    const int H = static_cast<int>(image.shape.dims()[0]);
    const int W = static_cast<int>(image.shape.dims()[1]);
    const auto theta = net.parameters();

    ForwardCache cache;
    cache.net_stamp = net.stamp();
    cache.height = H;
    cache.width = W;
    // Intensities in [0, 1] enter the first layer as 2x - 1. With raw
    // non-negative inputs dice training drifts to all-background.
    std::vector<double> centered(image.pixels.size());
    for (std::size_t i = 0; i < centered.size(); ++i) {
        centered[i] = 2.0 * image.pixels[i] - 1.0;
    }
    cache.activations.push_back(std::move(centered));

    std::vector<double> out;
    for (const ConvLayer& layer : net.layers()) {
        const ConvGeometry g = layer.geometry(H, W);
        out.assign(g.output_size(), 0.0);
        conv2d_forward(g, cache.activations.back(), theta.subspan(layer.weight_offset, layer.weight_count()),
                       theta.subspan(layer.bias_offset, static_cast<std::size_t>(layer.out_channels)), out);
        if (layer.relu) {
            std::vector<double> act(out.size());
            for (std::size_t j = 0; j < out.size(); ++j) {
                act[j] = out[j] > 0.0 ? out[j] : 0.0;
            }
            cache.pre_activations.push_back(std::move(out));
            cache.activations.push_back(std::move(act));
        } else {
            cache.pre_activations.emplace_back();
        }
    }
    LogitMap logits(image.shape, net.classes(), std::move(out));
    return {std::move(logits), std::move(cache)};
}

bool same_relu_pattern(const ForwardCache& a, const ForwardCache& b)
{
    if (a.pre_activations.size() != b.pre_activations.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.pre_activations.size(); ++l) {
        const auto& pa = a.pre_activations[l];
        const auto& pb = b.pre_activations[l];
        if (pa.size() != pb.size()) {
            return false;
        }
        for (std::size_t j = 0; j < pa.size(); ++j) {
            if ((pa[j] > 0.0) != (pb[j] > 0.0)) {
                return false;
            }
        }
    }
    return true;
}

ProbabilityMap softmax(const LogitMap& z)
{
    const std::size_t n = z.pixel_count();
    const int kt = z.class_count();
    std::vector<double> s(z.values().size());
    const auto zv = z.values();
    for (std::size_t i = 0; i < n; ++i) {
        double m = zv[i];
        for (int k = 1; k < kt; ++k) {
            m = std::max(m, zv[k * n + i]);
        }
        double total = 0.0;
        for (int k = 0; k < kt; ++k) {
            const double e = std::exp(zv[k * n + i] - m);
            s[k * n + i] = e;
            total += e;
        }
        for (int k = 0; k < kt; ++k) {
            s[k * n + i] /= total;
        }
    }
    return ProbabilityMap(z.shape(), z.classes(), std::move(s));
}

LogitMap softmax_backward(const ProbabilityMap& s, const GradientMap& dl_ds)
{
    require_same_layout(s, dl_ds, "softmax_backward");
    const std::size_t n = s.pixel_count();
    const int kt = s.class_count();
    const auto sv = s.values();
    const auto gv = dl_ds.values();
    std::vector<double> dz(sv.size());
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int k = 0; k < kt; ++k) {
            dot += gv[k * n + i] * sv[k * n + i];
        }
        for (int k = 0; k < kt; ++k) {
            dz[k * n + i] = sv[k * n + i] * (gv[k * n + i] - dot);
        }
    }
    return LogitMap(s.shape(), s.classes(), std::move(dz));
}

std::vector<double> backward(const SegNet& net, const ForwardCache& cache, const LogitMap& dl_dz)
{
    if (cache.net_stamp != net.stamp()) {
        throw ContractError("backward: forward cache is stale or belongs to another network");
    }
    const auto& layers = net.layers();
    if (cache.activations.size() != layers.size() || cache.pre_activations.size() != layers.size()) {
        throw ContractError("backward: malformed forward cache");
    }
    if (dl_dz.class_count() != net.classes().total() ||
        dl_dz.pixel_count() != static_cast<std::size_t>(cache.height) * cache.width) {
        throw DimensionError("backward: upstream gradient does not match the cached forward pass");
    }
    const auto theta = net.parameters();
    std::vector<double> grad(net.parameter_count(), 0.0);
    std::vector<double> upstream(dl_dz.values().begin(), dl_dz.values().end());
    std::vector<double> downstream;

    for (std::size_t l = layers.size(); l-- > 0;) {
        const ConvLayer& layer = layers[l];
        const ConvGeometry g = layer.geometry(cache.height, cache.width);
        if (layer.relu) {
            // Subgradient 0 at pre-activation <= 0.
            const auto& pre = cache.pre_activations[l];
            for (std::size_t j = 0; j < upstream.size(); ++j) {
                if (pre[j] <= 0.0) {
                    upstream[j] = 0.0;
                }
            }
        }
        conv2d_backward_params(g, upstream, cache.activations[l],
                               std::span<double>(grad).subspan(layer.weight_offset, layer.weight_count()),
                               std::span<double>(grad).subspan(layer.bias_offset,
                                                               static_cast<std::size_t>(layer.out_channels)));
        if (l > 0) {
            downstream.assign(g.input_size(), 0.0);
            conv2d_backward_input(g, upstream, theta.subspan(layer.weight_offset, layer.weight_count()), downstream);
            upstream.swap(downstream);
        }
    }
    return grad;
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v)
{
    char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    os.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* b)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegNet& net, nlohmann::ordered_json header)
{
    header["architecture"] = "conv3x3(1,8)+relu;conv3x3(8,8)+relu;conv1x1(8,K+1)";
    header["classes"] = net.classes().objects();
    header["parameter_count"] = net.parameter_count();
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("save_checkpoint: cannot open " + path.string());
    }
    os.write(kMagic, 8);
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : net.parameters()) {
        put_u64(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) {
        throw IoError("save_checkpoint: write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("load_checkpoint: cannot open " + path.string());
    }
    unsigned char head[16];
    is.read(reinterpret_cast<char*>(head), 16);
    if (is.gcount() != 16 || !std::equal(kMagic, kMagic + 8, reinterpret_cast<const char*>(head))) {
        throw IoError("load_checkpoint: bad magic in " + path.string());
    }
    const std::uint64_t len = get_u64(head + 8);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(is.gcount()) != len) {
        throw IoError("load_checkpoint: truncated header in " + path.string());
    }
    auto header = nlohmann::ordered_json::parse(text);
    SegNet net(ClassSet(header.at("classes").get<int>()));
    if (header.at("parameter_count").get<std::size_t>() != net.parameter_count()) {
        throw IoError("load_checkpoint: parameter count does not match the architecture");
    }
    std::vector<double> theta(net.parameter_count());
    std::vector<unsigned char> raw(theta.size() * 8);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
        throw IoError("load_checkpoint: truncated parameter block in " + path.string());
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
        theta[j] = std::bit_cast<double>(get_u64(raw.data() + 8 * j));
    }
    net.set_parameters(theta);
    return {std::move(net), std::move(header)};
}

}  // namespace seglab
