#include "seglab/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace seglab {

GradientMap finite_diff_grad(const ScalarLoss& loss, const ProbabilityMap& s, double h)
{
    if (!(h > 0.0)) {
        throw ValidationError("finite_diff_grad: step must be > 0");
    }
    const auto base = s.values();
    std::vector<double> work(base.begin(), base.end());
    std::vector<double> g(work.size());
    for (std::size_t j = 0; j < work.size(); ++j) {
        const double orig = work[j];
        work[j] = orig + h;
        const double up = loss(ProbabilityMap(s.shape(), s.classes(), work));
        work[j] = orig - h;
        const double down = loss(ProbabilityMap(s.shape(), s.classes(), work));
        work[j] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw OracleError("finite_diff_grad: non-finite loss at coordinate " + std::to_string(j));
        }
        g[j] = (up - down) / (2.0 * h);
    }
    return GradientMap(s.shape(), s.classes(), std::move(g));
}

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> x, std::span<const std::size_t> coords, double h)
{
    if (!(h > 0.0)) {
        throw ValidationError("finite_diff: step must be > 0");
    }
    std::vector<double> work(x.begin(), x.end());
    std::vector<double> g(coords.size());
    for (std::size_t c = 0; c < coords.size(); ++c) {
        const std::size_t j = coords[c];
        const double orig = work[j];
        work[j] = orig + h;
        const double up = loss(work);
        work[j] = orig - h;
        const double down = loss(work);
        work[j] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw OracleError("finite_diff: non-finite loss at coordinate " + std::to_string(j));
        }
        g[c] = (up - down) / (2.0 * h);
    }
    return g;
}

double relative_error(double analytic, double numeric)
{
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric)
{
    if (analytic.size() != numeric.size()) {
        throw DimensionError("max_relative_error: length mismatch");
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
        worst = std::max(worst, relative_error(analytic[j], numeric[j]));
    }
    return worst;
}

std::vector<int> audit_two_valued(const GradientMap& g, double tol)
{
    std::vector<int> counts;
    counts.reserve(g.class_count());
    for (int k = 0; k < g.class_count(); ++k) {
        const auto p = g.plane(k);
        std::vector<double> sorted(p.begin(), p.end());
        std::sort(sorted.begin(), sorted.end());
        int clusters = sorted.empty() ? 0 : 1;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i] - sorted[i - 1] > tol) {
                ++clusters;
            }
        }
        counts.push_back(clusters);
    }
    return counts;
}

std::size_t audit_bound(const GradientMap& g, const ClassOverlapStats& stats, double class_avg, double epsilon)
{
    if (stats.class_count() != g.class_count()) {
        throw DimensionError("audit_bound: stats cover a different class count");
    }
    std::size_t violations = 0;
    for (int k = 0; k < g.class_count(); ++k) {
        const double bound = class_avg * 2.0 / (stats.union_sum[k] + epsilon) + 1e-12;
        for (double v : g.plane(k)) {
            violations += std::abs(v) > bound;
        }
    }
    return violations;
}

double dynamic_range_db(const GradientMap& g)
{
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (double v : g.values()) {
        const double a = std::abs(v);
        if (a > 0.0) {
            hi = std::max(hi, a);
            lo = std::min(lo, a);
        }
    }
    if (hi == 0.0) {
        throw RangeError("dynamic_range_db: gradient map is all zero");
    }
    return 10.0 * std::log10(hi / lo);
}

std::string GradAuditReport::to_json() const
{
    nlohmann::ordered_json j;
    j["max_rel_error"] = max_rel_error;
    j["distinct_values"] = distinct_values;
    j["bound_violations"] = bound_violations;
    j["dynamic_range_db"] = dynamic_range_db;
    return j.dump(2) + "\n";
}

LabelMap random_labels(const GridShape& shape, ClassSet classes, Rng& rng)
{
    std::vector<int> idx(shape.pixel_count());
    for (int& k : idx) {
        k = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes.total())));
    }
    return one_hot_from_indices(idx, shape, classes);
}

ProbabilityMap random_probabilities(const GridShape& shape, ClassSet classes, Rng& rng, double lo, double hi)
{
    std::vector<double> v(shape.pixel_count() * static_cast<std::size_t>(classes.total()));
    for (double& x : v) {
        x = rng.uniform(lo, hi);
    }
    return ProbabilityMap(shape, classes, std::move(v));
}

ProbabilityMap noisy_prediction(const LabelMap& y, double sigma, Rng& rng, double floor)
{
    const std::size_t n = y.pixel_count();
    const int kt = y.class_count();
    const std::vector<int> truth = y.indices();
    std::vector<double> v(n * static_cast<std::size_t>(kt), 0.0);
    std::vector<double> share(static_cast<std::size_t>(kt));
    for (std::size_t i = 0; i < n; ++i) {
        const double keep = std::clamp(1.0 - std::abs(rng.normal(0.0, sigma)), floor, 1.0);
        double total = 0.0;
        for (int k = 0; k < kt; ++k) {
            share[k] = k == truth[i] ? 0.0 : rng.uniform(0.01, 1.0);
            total += share[k];
        }
        for (int k = 0; k < kt; ++k) {
            v[static_cast<std::size_t>(k) * n + i] = k == truth[i] ? keep : (1.0 - keep) * share[k] / total;
        }
    }
    return ProbabilityMap(y.shape(), y.classes(), std::move(v));
}

namespace {

void put_f32_le(std::ostream& os, float f)
{
    const auto bits = std::bit_cast<std::uint32_t>(f);
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
    os.write(bytes, 4);
}

float get_f32(const unsigned char* p, bool little)
{
    std::uint32_t bits = little ? (std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                   std::uint32_t(p[3]) << 24)
                                : (std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 |
                                   std::uint32_t(p[0]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace

void write_pfm(const std::filesystem::path& path, std::span<const double> plane, std::size_t width,
               std::size_t height)
{
    if (plane.size() != width * height) {
        throw DimensionError("write_pfm: plane size does not match " + std::to_string(width) + "x" +
                             std::to_string(height));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("write_pfm: cannot open " + path.string());
    }
    os << "Pf\n" << width << ' ' << height << "\n-1.0\n";
    for (std::size_t row = height; row-- > 0;) {
        for (std::size_t col = 0; col < width; ++col) {
            put_f32_le(os, static_cast<float>(plane[row * width + col]));
        }
    }
    if (!os) {
        throw IoError("write_pfm: write failed for " + path.string());
    }
}

PfmImage read_pfm(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("read_pfm: cannot open " + path.string());
    }
    std::string magic;
    PfmImage img;
    double scale = 0.0;
    is >> magic >> img.width >> img.height >> scale;
    if (!is || magic != "Pf") {
        throw IoError("read_pfm: not a single-channel PFM: " + path.string());
    }
    is.get();  // single whitespace before the raster
    const std::size_t count = img.width * img.height;
    std::vector<unsigned char> raw(count * 4);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
        throw IoError("read_pfm: truncated raster in " + path.string());
    }
    const bool little = scale < 0.0;
    img.pixels.resize(count);
    for (std::size_t r = 0; r < img.height; ++r) {
        const std::size_t row = img.height - 1 - r;
        for (std::size_t c = 0; c < img.width; ++c) {
            img.pixels[row * img.width + c] = get_f32(raw.data() + 4 * (r * img.width + c), little);
        }
    }
    return img;
}

std::vector<std::filesystem::path> export_gradient_map(const GradientMap& g, const std::filesystem::path& prefix)
{
    std::vector<std::filesystem::path> paths;
    for (int k = 0; k < g.class_count(); ++k) {
        std::filesystem::path p = prefix;
        p += "_k" + std::to_string(k) + ".pfm";
        write_pfm(p, g.plane(k), g.shape().width(), g.shape().height());
        paths.push_back(std::move(p));
    }
    return paths;
}

}  // namespace seglab
