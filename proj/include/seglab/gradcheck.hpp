#pragma once

// Gradient verification and analysis: central-difference oracle, two-valuedness
// and upper-bound audits, dynamic range, and PFM export of gradient planes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seglab/grid.hpp"
#include "seglab/rng.hpp"

namespace seglab {

using ScalarLoss = std::function<double(const ProbabilityMap&)>;

// Central difference (L(s + h e_j) - L(s - h e_j)) / 2h for every coordinate j.
// Perturbed maps are not clamped to [0, 1].
GradientMap finite_diff_grad(const ScalarLoss& loss, const ProbabilityMap& s, double h = 1e-5);

// Generic form over a flat parameter vector; used for network parameters.
// Only the coordinates listed in `coords` are differentiated.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> x, std::span<const std::size_t> coords, double h);

// |a - n| / max(1, |a|, |n|)
double relative_error(double analytic, double numeric);
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Number of clusters of values per class plane, where sorted neighbours closer
// than `tol` are merged (single linkage).
std::vector<int> audit_two_valued(const GradientMap& g, double tol);

// Count of entries with |g| > class_avg * 2 / (U_k + eps) + 1e-12.
std::size_t audit_bound(const GradientMap& g, const ClassOverlapStats& stats, double class_avg,
                        double epsilon = 1e-8);

// 10 log10(max |g| / min nonzero |g|) over all classes and pixels.
// Throws RangeError for an all-zero map.
double dynamic_range_db(const GradientMap& g);

struct GradAuditReport {
    double max_rel_error = 0.0;
    std::vector<int> distinct_values;
    std::size_t bound_violations = 0;
    double dynamic_range_db = 0.0;

    // {"max_rel_error": .., "distinct_values": [..], "bound_violations": .., "dynamic_range_db": ..}
    std::string to_json() const;
};

// Random label map with |K| classes where each pixel draws a class uniformly.
LabelMap random_labels(const GridShape& shape, ClassSet classes, Rng& rng);
// Independent uniform s in [lo, hi] per entry (not simplex-normalized).
ProbabilityMap random_probabilities(const GridShape& shape, ClassSet classes, Rng& rng, double lo = 0.0,
                                    double hi = 1.0);
// A correct prediction perturbed by noise: the true class keeps 1 - |N(0, sigma)|
// (floored at `floor`), the remainder is spread over the other classes at random.
ProbabilityMap noisy_prediction(const LabelMap& y, double sigma, Rng& rng, double floor = 0.05);

// PFM ("Pf", little-endian, scale -1.0), rows stored bottom-to-top.
void write_pfm(const std::filesystem::path& path, std::span<const double> plane, std::size_t width,
               std::size_t height);

struct PfmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    // Row-major, top row first.
    std::vector<float> pixels;
};

PfmImage read_pfm(const std::filesystem::path& path);

// Writes <prefix>_k<k>.pfm for every class plane; returns the written paths.
std::vector<std::filesystem::path> export_gradient_map(const GradientMap& g, const std::filesystem::path& prefix);

}  // namespace seglab
