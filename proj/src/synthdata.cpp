#include "seglab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "seglab/rng.hpp"

namespace seglab {

std::string_view to_string(DatasetKind kind)
{
    return kind == DatasetKind::acdc_like ? "acdc_like" : "promise_like";
}

DatasetKind parse_dataset_kind(std::string_view name)
{
    if (name == "acdc_like") {
        return DatasetKind::acdc_like;
    }
    if (name == "promise_like") {
        return DatasetKind::promise_like;
    }
    throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

GridShape DatasetSpec::shape() const
{
    return GridShape(static_cast<std::size_t>(image_size[0]), static_cast<std::size_t>(image_size[1]));
}

void DatasetSpec::validate() const
{
    if (image_size[0] < 16 || image_size[1] < 16) {
        throw ConfigError("dataset: image_size must be at least 16x16");
    }
    if (train < 1 || val < 1 || test < 1) {
        throw ConfigError("dataset: every split needs at least one sample");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ConfigError("dataset: noise_sigma must be >= 0");
    }
}

std::vector<double> class_intensities(DatasetKind kind)
{
    if (kind == DatasetKind::acdc_like) {
        // background, RV, Myo, LV
        return {0.2, 0.65, 0.5, 0.8};
    }
    return {0.25, 0.7};
}

namespace {

constexpr int kMaxRetries = 100;

Stream split_stream(Split split)
{
    switch (split) {
    case Split::train:
        return Stream::dataset_train;
    case Split::val:
        return Stream::dataset_val;
    case Split::test:
        return Stream::dataset_test;
    }
    return Stream::dataset_train;
}

const char* split_name(Split split)
{
    switch (split) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "?";
}

// Fills `idx` with a class index per pixel; returns false when a class ended up empty.
bool draw_acdc(Rng& rng, int H, int W, std::vector<int>& idx)
{
    const double scale = std::min(H, W) / 64.0;
    const double cy = rng.uniform(0.35, 0.65) * H;
    const double cx = rng.uniform(0.35, 0.65) * W;
    const double r_lv = rng.uniform(4.0, 7.0) * scale;
    const double r_myo = r_lv + rng.uniform(2.0, 4.0) * scale;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double offset = r_myo * rng.uniform(0.6, 1.0);
    const double r_rv = r_myo * rng.uniform(0.8, 1.2);
    const double ry = cy + offset * std::sin(phi);
    const double rx = cx + offset * std::cos(phi);

    std::array<std::size_t, 4> counts{};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double d = std::hypot(y - cy, x - cx);
            int k = 0;
            if (d <= r_lv) {
                k = 3;
            } else if (d <= r_myo) {
                k = 2;
            } else if (std::hypot(y - ry, x - rx) <= r_rv) {
                k = 1;
            }
            idx[static_cast<std::size_t>(y) * W + x] = k;
            ++counts[k];
        }
    }
    return std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
}

bool draw_promise(Rng& rng, int H, int W, std::vector<int>& idx)
{
    const double scale = std::min(H, W) / 64.0;
    const double cy = rng.uniform(0.35, 0.65) * H;
    const double cx = rng.uniform(0.35, 0.65) * W;
    const double a = rng.uniform(6.0, 14.0) * scale;
    const double b = rng.uniform(6.0, 14.0) * scale;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    std::size_t fg = 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double u = (x - cx) * c + (y - cy) * s;
            const double v = -(x - cx) * s + (y - cy) * c;
            const bool inside = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
            idx[static_cast<std::size_t>(y) * W + x] = inside ? 1 : 0;
            fg += inside;
        }
    }
    return fg > 0 && fg < static_cast<std::size_t>(H) * W;
}

char* format_id(char* buf, std::size_t n, const char* split, int index)
{
    std::snprintf(buf, n, "%s_%04d", split, index);
    return buf;
}

}  // namespace

Sample generate_sample(const DatasetSpec& spec, Split split, int index)
{
    const int H = spec.image_size[0];
    const int W = spec.image_size[1];
    Rng rng(derive_seed(spec.seed, split_stream(split), static_cast<std::uint64_t>(index)));
    std::vector<int> idx(static_cast<std::size_t>(H) * W);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
        ok = spec.kind == DatasetKind::acdc_like ? draw_acdc(rng, H, W, idx) : draw_promise(rng, H, W, idx);
    }
    if (!ok) {
        throw ValidationError("generate: could not draw a sample with every class present");
    }
    const std::vector<double> level = class_intensities(spec.kind);
    std::vector<double> pixels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double noise = spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma) : 0.0;
        pixels[i] = std::clamp(level[idx[i]] + noise, 0.0, 1.0);
    }
    char id[32];
    const GridShape shape = spec.shape();
    return Sample{Image(shape, std::move(pixels)), one_hot_from_indices(idx, shape, spec.classes()),
                  format_id(id, sizeof id, split_name(split), index)};
}

Dataset generate(const DatasetSpec& spec)
{
    spec.validate();
    Dataset data;
    auto fill = [&](std::vector<Sample>& out, Split split, int count) {
        out.reserve(count);
        for (int i = 0; i < count; ++i) {
            out.push_back(generate_sample(spec, split, i));
        }
    };
    fill(data.train, Split::train, spec.train);
    fill(data.val, Split::val, spec.val);
    fill(data.test, Split::test, spec.test);
    return data;
}

Sample sample_by_id(const DatasetSpec& spec, std::string_view id)
{
    const auto us = id.find('_');
    if (us == std::string_view::npos) {
        throw ValidationError("sample id '" + std::string(id) + "' is not <split>_<index>");
    }
    const std::string_view name = id.substr(0, us);
    const int index = std::atoi(std::string(id.substr(us + 1)).c_str());
    Split split;
    int count;
    if (name == "train") {
        split = Split::train;
        count = spec.train;
    } else if (name == "val") {
        split = Split::val;
        count = spec.val;
    } else if (name == "test") {
        split = Split::test;
        count = spec.test;
    } else {
        throw ValidationError("sample id '" + std::string(id) + "' has an unknown split");
    }
    if (index < 0 || index >= count) {
        throw ValidationError("sample id '" + std::string(id) + "' is out of range");
    }
    return generate_sample(spec, split, index);
}

AugmentDraw draw_augmentation(std::uint64_t seed)
{
    Rng rng(seed);
    AugmentDraw d;
    d.flip_horizontal = rng.below(2) == 1;
    d.flip_vertical = rng.below(2) == 1;
    d.rotations = static_cast<int>(rng.below(4));
    return d;
}

namespace {

// Row-major grid of source pixel indices, transformed in place of the pixels.
struct IndexGrid {
    std::size_t h;
    std::size_t w;
    std::vector<std::size_t> src;

    void flip_horizontal()
    {
        for (std::size_t y = 0; y < h; ++y) {
            std::reverse(src.begin() + y * w, src.begin() + (y + 1) * w);
        }
    }

    void flip_vertical()
    {
        for (std::size_t y = 0; y < h / 2; ++y) {
            std::swap_ranges(src.begin() + y * w, src.begin() + (y + 1) * w, src.begin() + (h - 1 - y) * w);
        }
    }

    // One counter-clockwise quarter turn: out(y, x) = in(x, w - 1 - y), out is w x h.
    void rotate_ccw()
    {
        std::vector<std::size_t> out(src.size());
        for (std::size_t y = 0; y < w; ++y) {
            for (std::size_t x = 0; x < h; ++x) {
                out[y * h + x] = src[x * w + (w - 1 - y)];
            }
        }
        src.swap(out);
        std::swap(h, w);
    }
};

}  // namespace

Sample apply_augmentation(const Sample& sample, const AugmentDraw& draw)
{
    if (sample.image.shape.rank() != 2) {
        throw DimensionError("augment: only 2-D samples are supported");
    }
    if (draw.is_identity()) {
        return sample;
    }
    IndexGrid grid{sample.image.shape.dims()[0], sample.image.shape.dims()[1], {}};
    grid.src.resize(grid.h * grid.w);
    for (std::size_t i = 0; i < grid.src.size(); ++i) {
        grid.src[i] = i;
    }
    if (draw.flip_horizontal) {
        grid.flip_horizontal();
    }
    if (draw.flip_vertical) {
        grid.flip_vertical();
    }
    for (int r = 0; r < draw.rotations; ++r) {
        grid.rotate_ccw();
    }
    const std::vector<std::size_t>& map = grid.src;
    const std::size_t oh = grid.h;
    const std::size_t ow = grid.w;
    std::vector<double> pixels(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        pixels[i] = sample.image.pixels[map[i]];
    }
    const std::vector<int> src_idx = sample.label.indices();
    std::vector<int> idx(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        idx[i] = src_idx[map[i]];
    }
    GridShape shape(oh, ow);
    return Sample{Image(shape, std::move(pixels)), one_hot_from_indices(idx, shape, sample.label.classes()),
                  sample.id};
}

Sample augment(const Sample& sample, std::uint64_t seed)
{
    return apply_augmentation(sample, draw_augmentation(seed));
}

namespace {

void write_pgm16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint16_t>& values)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("export_dataset: cannot open " + path.string());
    }
    os << "P5\n" << width << ' ' << height << "\n65535\n";
    for (std::uint16_t v : values) {
        const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
        os.write(b, 2);
    }
    if (!os) {
        throw IoError("export_dataset: write failed for " + path.string());
    }
}

}  // namespace

void export_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["kind"] = to_string(spec.kind);
    manifest["image_size"] = spec.image_size;
    manifest["classes"] = spec.classes().objects();
    manifest["noise_sigma"] = spec.noise_sigma;
    manifest["seed"] = spec.seed;
    manifest["intensities"] = class_intensities(spec.kind);

    auto dump = [&](const std::vector<Sample>& samples, const char* split) {
        nlohmann::ordered_json ids = nlohmann::ordered_json::array();
        for (const Sample& s : samples) {
            const std::size_t w = s.image.shape.width();
            const std::size_t h = s.image.shape.height();
            std::vector<std::uint16_t> img(s.image.pixels.size());
            for (std::size_t i = 0; i < img.size(); ++i) {
                img[i] = static_cast<std::uint16_t>(std::lround(std::clamp(s.image.pixels[i], 0.0, 1.0) * 65535.0));
            }
            write_pgm16(dir / (s.id + "_image.pgm"), w, h, img);
            const std::vector<int> idx = s.label.indices();
            std::vector<std::uint16_t> lab(idx.begin(), idx.end());
            write_pgm16(dir / (s.id + "_label.pgm"), w, h, lab);
            ids.push_back(s.id);
        }
        manifest["splits"][split] = ids;
    };
    dump(data.train, "train");
    dump(data.val, "val");
    dump(data.test, "test");

    std::ofstream os(dir / "manifest.json", std::ios::binary);
    if (!os) {
        throw IoError("export_dataset: cannot write manifest in " + dir.string());
    }
    os << manifest.dump(2) << '\n';
}

}  // namespace seglab
