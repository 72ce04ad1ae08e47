#pragma once

// Deterministic synthetic segmentation datasets.
//
// acdc_like (K = 3): an LV disk (class 3) inside a myocardium annulus (class 2),
// with an RV crescent (class 1) hugging the annulus. promise_like (K = 1): one
// rotated ellipse. Images are piecewise constant per class plus i.i.d. Gaussian
// noise, clamped to [0, 1]; labels are noise free.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "seglab/grid.hpp"

namespace seglab {

enum class DatasetKind { acdc_like, promise_like };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::acdc_like;
    std::array<int, 2> image_size{64, 64};  // {height, width}
    int train = 500;
    int val = 50;
    int test = 100;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    ClassSet classes() const { return ClassSet(kind == DatasetKind::acdc_like ? 3 : 1); }
    GridShape shape() const;
    void validate() const;
};

struct Sample {
    Image image;
    LabelMap label;
    std::string id;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

// Background and per-class intensities used by the generator (index = class).
std::vector<double> class_intensities(DatasetKind kind);

Dataset generate(const DatasetSpec& spec);

// One sample of a split, generated independently of all others.
enum class Split { train, val, test };
Sample generate_sample(const DatasetSpec& spec, Split split, int index);

// Looks up a sample by id ("train_0007", "val_0000", ...) without generating the rest.
Sample sample_by_id(const DatasetSpec& spec, std::string_view id);

struct AugmentDraw {
    bool flip_horizontal = false;
    bool flip_vertical = false;
    int rotations = 0;  // quarter turns counter-clockwise, 0..3

    bool is_identity() const { return !flip_horizontal && !flip_vertical && rotations == 0; }
};

AugmentDraw draw_augmentation(std::uint64_t seed);
// Flips first, then rotates; image and label receive the same transform.
Sample apply_augmentation(const Sample& sample, const AugmentDraw& draw);
Sample augment(const Sample& sample, std::uint64_t seed);

// PGM (P5, maxval 65535, big-endian) per image and per label-index map, plus
// manifest.json listing ids and split membership.
void export_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& dir);

}  // namespace seglab
