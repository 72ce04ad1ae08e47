#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seglab/grid.hpp"

namespace seglab {

// Hard Dice per class (background included, index 0):
//   2 |y_k & p_k| / (|y_k| + |p_k| + eps), and 1.0 when both are empty.
std::vector<double> dsc(const LabelMap& y, const LabelMap& pred, double eps = 1e-8);

// One-hot of the per-pixel argmax; ties go to the lowest class index.
LabelMap argmax_predict(const ProbabilityMap& s);

struct CalibrationBin {
    std::size_t count = 0;
    double confidence = 0.0;  // mean s in the bin
    double accuracy = 0.0;    // mean y in the bin
};

struct ClassCalibration {
    double clece = 0.0;
    std::vector<CalibrationBin> bins;
};

// Equal-width bins [j/B, (j+1)/B) on s_k, last bin closed. Per class
//   ClECE_k = sum_b (n_b / |Omega|) |acc_b - conf_b|.
std::vector<ClassCalibration> calibration(const LabelMap& y, const ProbabilityMap& s, int bins = 10);
std::vector<double> clece(const LabelMap& y, const ProbabilityMap& s, int bins = 10);

// Mean over object classes 1..K (background excluded).
double object_mean(const std::vector<double>& per_class);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

MeanStd mean_std(const std::vector<double>& values);

// Aggregated per-sample metrics over a test split.
struct ClassMetricReport {
    std::vector<MeanStd> dsc;    // per class, background included
    std::vector<MeanStd> clece;  // per class
    MeanStd dsc_mean;            // per-sample object mean, then aggregated
    MeanStd clece_mean;
    std::vector<ClassCalibration> pooled_bins;  // bin diagnostics summed over samples
};

class MetricAccumulator {
public:
    MetricAccumulator(int class_count, int bins);

    void add(const LabelMap& y, const ProbabilityMap& s);
    std::size_t samples() const { return sample_count_; }
    ClassMetricReport report() const;

private:
    int class_count_;
    int bins_;
    std::size_t sample_count_ = 0;
    std::vector<std::vector<double>> dsc_;    // [class][sample]
    std::vector<std::vector<double>> clece_;  // [class][sample]
    std::vector<double> dsc_mean_;
    std::vector<double> clece_mean_;
    // Pooled bin sums: count, sum s, sum y per class and bin.
    std::vector<std::vector<CalibrationBin>> pooled_;
    std::size_t pooled_pixels_ = 0;
};

// "83.7 (7.2)": percentages with one decimal.
std::string format_percent(const MeanStd& v);

}  // namespace seglab
