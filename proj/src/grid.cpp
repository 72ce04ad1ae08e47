#include "seglab/grid.hpp"

#include <cmath>
#include <sstream>

namespace seglab {

ClassSet::ClassSet(int objects) : objects_(objects)
{
    if (objects < 1) {
        throw ValidationError("class set needs at least one object class, got " + std::to_string(objects));
    }
}

GridShape::GridShape(std::vector<std::size_t> dims) : dims_(std::move(dims)), pixel_count_(1)
{
    if (dims_.empty()) {
        throw ValidationError("grid shape needs at least one dimension");
    }
    for (std::size_t d : dims_) {
        if (d == 0) {
            throw ValidationError("grid dimensions must be positive");
        }
        pixel_count_ *= d;
    }
}

std::string GridShape::to_string() const
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        os << (i ? "," : "") << dims_[i];
    }
    os << ']';
    return os.str();
}

LabelMap::LabelMap(GridShape shape, ClassSet classes, std::vector<double> values)
    : field_(std::move(shape), classes, std::move(values))
{
    const std::size_t n = pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        int ones = 0;
        for (int k = 0; k < class_count(); ++k) {
            const double v = field_.at(k, i);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw ValidationError("label map: value at pixel " + std::to_string(i) + " is not binary");
            }
        }
        if (ones != 1) {
            throw ValidationError("label map: pixel " + std::to_string(i) + " is not one-hot");
        }
    }
}

std::size_t LabelMap::class_size(int k) const
{
    std::size_t count = 0;
    for (double v : plane(k)) {
        count += v == 1.0;
    }
    return count;
}

std::vector<int> LabelMap::indices() const
{
    std::vector<int> idx(pixel_count(), 0);
    for (int k = 1; k < class_count(); ++k) {
        const auto p = plane(k);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 1.0) {
                idx[i] = k;
            }
        }
    }
    return idx;
}

Image::Image(GridShape s, std::vector<double> p) : shape(std::move(s)), pixels(std::move(p))
{
    if (pixels.size() != shape.pixel_count()) {
        throw DimensionError("image: pixel buffer does not match shape " + shape.to_string());
    }
}

ClassOverlapStats overlap_stats(const LabelMap& y, const ProbabilityMap& s)
{
    require_same_layout(y, s, "overlap_stats");
    ClassOverlapStats stats;
    stats.intersection.resize(y.class_count());
    stats.union_sum.resize(y.class_count());
    for (int k = 0; k < y.class_count(); ++k) {
        const auto yk = y.plane(k);
        const auto sk = s.plane(k);
        double inter = 0.0;
        double uni = 0.0;
        for (std::size_t i = 0; i < yk.size(); ++i) {
            inter += yk[i] * sk[i];
            uni += yk[i] + sk[i];
        }
        stats.intersection[k] = inter;
        stats.union_sum[k] = uni;
    }
    return stats;
}

LabelMap one_hot_from_indices(std::span<const int> indices, const GridShape& shape, ClassSet classes)
{
    const std::size_t n = shape.pixel_count();
    if (indices.size() != n) {
        throw DimensionError("one_hot_from_indices: " + std::to_string(indices.size()) + " indices for " +
                             std::to_string(n) + " pixels");
    }
    std::vector<double> values(n * static_cast<std::size_t>(classes.total()), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int k = indices[i];
        if (k < 0 || k >= classes.total()) {
            throw ValidationError("one_hot_from_indices: index " + std::to_string(k) + " at pixel " +
                                  std::to_string(i) + " outside [0, " + std::to_string(classes.total()) + ")");
        }
        values[static_cast<std::size_t>(k) * n + i] = 1.0;
    }
    return LabelMap(shape, classes, std::move(values));
}

std::vector<int> argmax_indices(const ProbabilityMap& s)
{
    const std::size_t n = s.pixel_count();
    std::vector<int> idx(n, 0);
    std::vector<double> best(s.plane(0).begin(), s.plane(0).end());
    for (int k = 1; k < s.class_count(); ++k) {
        const auto p = s.plane(k);
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] > best[i]) {
                best[i] = p[i];
                idx[i] = k;
            }
        }
    }
    return idx;
}

}  // namespace seglab
