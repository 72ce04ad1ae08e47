#pragma once

// Dense per-class planes over a D-dimensional pixel grid.
//
// Every map stores |K| planes of |Omega| values, flattened row-major per plane:
// value (i, k) lives at k * |Omega| + i. Class 0 is always background.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seglab/errors.hpp"

namespace seglab {

class ClassSet {
public:
    // `objects` is K, the number of non-background classes.
    explicit ClassSet(int objects);

    int objects() const { return objects_; }
    int total() const { return objects_ + 1; }

    friend bool operator==(const ClassSet&, const ClassSet&) = default;

private:
    int objects_;
};

class GridShape {
public:
    explicit GridShape(std::vector<std::size_t> dims);
    GridShape(std::size_t height, std::size_t width) : GridShape(std::vector<std::size_t>{height, width}) {}

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t pixel_count() const { return pixel_count_; }

    // 2-D accessors; the leading dims are folded into the height for D != 2.
    std::size_t width() const { return dims_.back(); }
    std::size_t height() const { return pixel_count_ / dims_.back(); }

    std::string to_string() const;

    friend bool operator==(const GridShape& a, const GridShape& b) { return a.dims_ == b.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::size_t pixel_count_;
};

// Immutable |K| x |Omega| field of doubles. The tag keeps labels, probabilities,
// logits and gradients from being mixed up at call sites.
template <typename Tag>
class ClassField {
public:
    ClassField(GridShape shape, ClassSet classes, std::vector<double> values)
        : shape_(std::move(shape)), classes_(classes), values_(std::move(values))
    {
        if (values_.size() != shape_.pixel_count() * static_cast<std::size_t>(classes_.total())) {
            throw DimensionError("class field: expected " +
                                 std::to_string(shape_.pixel_count() * classes_.total()) + " values, got " +
                                 std::to_string(values_.size()));
        }
    }

    static ClassField zeros(GridShape shape, ClassSet classes)
    {
        const std::size_t n = shape.pixel_count() * static_cast<std::size_t>(classes.total());
        return ClassField(std::move(shape), classes, std::vector<double>(n, 0.0));
    }

    const GridShape& shape() const { return shape_; }
    const ClassSet& classes() const { return classes_; }
    std::size_t pixel_count() const { return shape_.pixel_count(); }
    int class_count() const { return classes_.total(); }

    double at(int k, std::size_t i) const { return values_[static_cast<std::size_t>(k) * pixel_count() + i]; }

    std::span<const double> plane(int k) const
    {
        return std::span<const double>(values_).subspan(static_cast<std::size_t>(k) * pixel_count(), pixel_count());
    }
    std::span<const double> values() const { return values_; }

    // Moves the storage out, leaving this field empty.
    std::vector<double> release() && { return std::move(values_); }

private:
    GridShape shape_;
    ClassSet classes_;
    std::vector<double> values_;
};

struct ProbabilityTag {};
struct GradientTag {};
struct LogitTag {};

// Predicted class probabilities s. Softmax output is on the simplex; the
// finite-difference oracle also builds maps slightly outside [0, 1].
using ProbabilityMap = ClassField<ProbabilityTag>;
// dL/ds for a scalar loss L.
using GradientMap = ClassField<GradientTag>;
// Network logits z, and (reused) dL/dz.
using LogitMap = ClassField<LogitTag>;

// One-hot ground truth y. Construction validates the per-pixel partition.
class LabelMap {
public:
    LabelMap(GridShape shape, ClassSet classes, std::vector<double> values);

    const GridShape& shape() const { return field_.shape(); }
    const ClassSet& classes() const { return field_.classes(); }
    std::size_t pixel_count() const { return field_.pixel_count(); }
    int class_count() const { return field_.class_count(); }

    double at(int k, std::size_t i) const { return field_.at(k, i); }
    std::span<const double> plane(int k) const { return field_.plane(k); }
    std::span<const double> values() const { return field_.values(); }

    // |Omega_y^(k)|
    std::size_t class_size(int k) const;
    // Per-pixel class index (the unique k with y = 1).
    std::vector<int> indices() const;

private:
    struct LabelTag {};
    ClassField<LabelTag> field_;
};

// Single-channel image on the grid.
struct Image {
    GridShape shape;
    std::vector<double> pixels;

    Image(GridShape s, std::vector<double> p);
};

// Per-class I = sum y*s and U = sum (y + s).
struct ClassOverlapStats {
    std::vector<double> intersection;
    std::vector<double> union_sum;

    int class_count() const { return static_cast<int>(intersection.size()); }
};

template <typename A, typename B>
void require_same_layout(const A& a, const B& b, const char* what)
{
    if (!(a.shape() == b.shape()) || !(a.classes() == b.classes())) {
        throw DimensionError(std::string(what) + ": shape/class mismatch (" + a.shape().to_string() + " x " +
                             std::to_string(a.class_count()) + " vs " + b.shape().to_string() + " x " +
                             std::to_string(b.class_count()) + ")");
    }
}

ClassOverlapStats overlap_stats(const LabelMap& y, const ProbabilityMap& s);

LabelMap one_hot_from_indices(std::span<const int> indices, const GridShape& shape, ClassSet classes);

// Per-pixel argmax, ties resolved toward the lowest class index.
std::vector<int> argmax_indices(const ProbabilityMap& s);

}  // namespace seglab
