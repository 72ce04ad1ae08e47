#include "seglab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace seglab {

std::vector<double> dsc(const LabelMap& y, const LabelMap& pred, double eps)
{
    require_same_layout(y, pred, "dsc");
    std::vector<double> out(static_cast<std::size_t>(y.class_count()));
    for (int k = 0; k < y.class_count(); ++k) {
        const auto a = y.plane(k);
        const auto b = pred.plane(k);
        double inter = 0.0;
        double size_a = 0.0;
        double size_b = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            inter += a[i] * b[i];
            size_a += a[i];
            size_b += b[i];
        }
        out[k] = (size_a + size_b == 0.0) ? 1.0 : 2.0 * inter / (size_a + size_b + eps);
    }
    return out;
}

LabelMap argmax_predict(const ProbabilityMap& s)
{
    return one_hot_from_indices(argmax_indices(s), s.shape(), s.classes());
}

namespace {

int bin_of(double conf, int bins)
{
    const double c = std::clamp(conf, 0.0, 1.0);
    return std::min(static_cast<int>(c * bins), bins - 1);
}

}  // namespace

std::vector<ClassCalibration> calibration(const LabelMap& y, const ProbabilityMap& s, int bins)
{
    require_same_layout(y, s, "clece");
    if (bins < 1) {
        throw ValidationError("clece: bins must be >= 1");
    }
    const double n = static_cast<double>(y.pixel_count());
    std::vector<ClassCalibration> out(static_cast<std::size_t>(y.class_count()));
    for (int k = 0; k < y.class_count(); ++k) {
        std::vector<double> sum_s(bins, 0.0);
        std::vector<double> sum_y(bins, 0.0);
        std::vector<std::size_t> count(bins, 0);
        const auto yk = y.plane(k);
        const auto sk = s.plane(k);
        for (std::size_t i = 0; i < yk.size(); ++i) {
            const int b = bin_of(sk[i], bins);
            ++count[b];
            sum_s[b] += sk[i];
            sum_y[b] += yk[i];
        }
        ClassCalibration& cc = out[k];
        cc.bins.resize(bins);
        for (int b = 0; b < bins; ++b) {
            if (count[b] == 0) {
                continue;
            }
            CalibrationBin& bin = cc.bins[b];
            bin.count = count[b];
            bin.confidence = sum_s[b] / count[b];
            bin.accuracy = sum_y[b] / count[b];
            cc.clece += (count[b] / n) * std::abs(bin.accuracy - bin.confidence);
        }
    }
    return out;
}

std::vector<double> clece(const LabelMap& y, const ProbabilityMap& s, int bins)
{
    std::vector<double> out;
    for (const ClassCalibration& cc : calibration(y, s, bins)) {
        out.push_back(cc.clece);
    }
    return out;
}

double object_mean(const std::vector<double>& per_class)
{
    if (per_class.size() < 2) {
        throw DimensionError("object_mean: need at least one object class");
    }
    double total = 0.0;
    for (std::size_t k = 1; k < per_class.size(); ++k) {
        total += per_class[k];
    }
    return total / static_cast<double>(per_class.size() - 1);
}

MeanStd mean_std(const std::vector<double>& values)
{
    MeanStd r;
    if (values.empty()) {
        return r;
    }
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    r.mean = total / values.size();
    double sq = 0.0;
    for (double v : values) {
        sq += (v - r.mean) * (v - r.mean);
    }
    r.std = std::sqrt(sq / values.size());
    return r;
}

MetricAccumulator::MetricAccumulator(int class_count, int bins)
    : class_count_(class_count), bins_(bins), dsc_(class_count), clece_(class_count),
      pooled_(class_count, std::vector<CalibrationBin>(bins))
{
}

void MetricAccumulator::add(const LabelMap& y, const ProbabilityMap& s)
{
    if (y.class_count() != class_count_) {
        throw DimensionError("metric accumulator: class count mismatch");
    }
    const std::vector<double> d = dsc(y, argmax_predict(s));
    const std::vector<ClassCalibration> cal = calibration(y, s, bins_);
    std::vector<double> ce(class_count_);
    for (int k = 0; k < class_count_; ++k) {
        dsc_[k].push_back(d[k]);
        ce[k] = cal[k].clece;
        clece_[k].push_back(ce[k]);
        for (int b = 0; b < bins_; ++b) {
            const CalibrationBin& src = cal[k].bins[b];
            CalibrationBin& dst = pooled_[k][b];
            dst.count += src.count;
            // Accumulate sums; normalized in report().
            dst.confidence += src.confidence * src.count;
            dst.accuracy += src.accuracy * src.count;
        }
    }
    dsc_mean_.push_back(object_mean(d));
    clece_mean_.push_back(object_mean(ce));
    pooled_pixels_ += y.pixel_count();
    ++sample_count_;
}

ClassMetricReport MetricAccumulator::report() const
{
    ClassMetricReport r;
    for (int k = 0; k < class_count_; ++k) {
        r.dsc.push_back(mean_std(dsc_[k]));
        r.clece.push_back(mean_std(clece_[k]));
        ClassCalibration pooled;
        pooled.bins = pooled_[k];
        for (CalibrationBin& bin : pooled.bins) {
            if (bin.count > 0) {
                bin.confidence /= bin.count;
                bin.accuracy /= bin.count;
                pooled.clece += (static_cast<double>(bin.count) / pooled_pixels_) * std::abs(bin.accuracy - bin.confidence);
            }
        }
        r.pooled_bins.push_back(std::move(pooled));
    }
    r.dsc_mean = mean_std(dsc_mean_);
    r.clece_mean = mean_std(clece_mean_);
    return r;
}

std::string format_percent(const MeanStd& v)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.1f (%.1f)", 100.0 * v.mean, 100.0 * v.std);
    return buf;
}

}  // namespace seglab
