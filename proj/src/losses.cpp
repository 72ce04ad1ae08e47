#include "seglab/losses.hpp"

#include <algorithm>
#include <cmath>

namespace seglab {

void LossConfig::validate() const
{
    if (!(epsilon > 0.0)) {
        throw ConfigError("loss config: epsilon must be > 0");
    }
    if (!(ce_clamp > 0.0)) {
        throw ConfigError("loss config: ce_clamp must be > 0");
    }
}

std::string_view to_string(LossId id)
{
    switch (id) {
    case LossId::ce:
        return "ce";
    case LossId::dice:
        return "dice";
    case LossId::mime:
        return "mime";
    case LossId::nm:
        return "nm";
    }
    return "?";
}

LossId parse_loss_id(std::string_view name)
{
    if (name == "ce") {
        return LossId::ce;
    }
    if (name == "dice" || name == "dsc") {
        return LossId::dice;
    }
    if (name == "mime") {
        return LossId::mime;
    }
    if (name == "nm") {
        return LossId::nm;
    }
    throw ConfigError("unknown loss id '" + std::string(name) + "'");
}

MimeWeights MimeWeights::from_labels(const LabelMap& y, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw ValidationError("mime weights need a > 0 and b > 0");
    }
    std::vector<double> omega(y.values().size());
    const auto yv = y.values();
    for (std::size_t j = 0; j < omega.size(); ++j) {
        omega[j] = yv[j] == 1.0 ? -a : b;
    }
    return MimeWeights(GradientMap(y.shape(), y.classes(), std::move(omega)), a, b);
}

double dice_loss(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg)
{
    const ClassOverlapStats stats = overlap_stats(y, s);
    double total = 0.0;
    for (int k = 0; k < stats.class_count(); ++k) {
        total += 1.0 - 2.0 * stats.intersection[k] / (stats.union_sum[k] + cfg.epsilon);
    }
    return total / stats.class_count();
}

GradientMap dice_grad(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg)
{
    const ClassOverlapStats stats = overlap_stats(y, s);
    const std::size_t n = y.pixel_count();
    const double class_avg = 1.0 / y.class_count();
    std::vector<double> g(y.values().size());
    for (int k = 0; k < y.class_count(); ++k) {
        const double inter = stats.intersection[k];
        const double denom = stats.union_sum[k] + cfg.epsilon;
        const double sq = denom * denom;
        // The two values of the case split; every pixel of plane k takes one of them.
        const double fg = class_avg * (-2.0 * (stats.union_sum[k] - inter) / sq);
        const double bg = class_avg * (2.0 * inter / sq);
        const auto yk = y.plane(k);
        double* out = g.data() + static_cast<std::size_t>(k) * n;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = yk[i] == 1.0 ? fg : bg;
        }
    }
    return GradientMap(y.shape(), y.classes(), std::move(g));
}

double ce_loss(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg)
{
    require_same_layout(y, s, "ce_loss");
    const auto yv = y.values();
    const auto sv = s.values();
    double total = 0.0;
    for (std::size_t j = 0; j < yv.size(); ++j) {
        if (yv[j] != 0.0) {
            total -= yv[j] * std::log(std::max(sv[j], cfg.ce_clamp));
        }
    }
    return total / static_cast<double>(yv.size());
}

GradientMap ce_grad(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg)
{
    require_same_layout(y, s, "ce_grad");
    const auto yv = y.values();
    const auto sv = s.values();
    const double norm = static_cast<double>(yv.size());
    std::vector<double> g(yv.size(), 0.0);
    for (std::size_t j = 0; j < yv.size(); ++j) {
        if (yv[j] != 0.0) {
            g[j] = -yv[j] / (norm * std::max(sv[j], cfg.ce_clamp));
        }
    }
    return GradientMap(y.shape(), y.classes(), std::move(g));
}

double mime_loss(const ProbabilityMap& s, const MimeWeights& w)
{
    require_same_layout(w.map(), s, "mime_loss");
    const auto wv = w.map().values();
    const auto sv = s.values();
    double total = 0.0;
    for (std::size_t j = 0; j < wv.size(); ++j) {
        total += wv[j] * sv[j];
    }
    return total;
}

GradientMap mime_grad(const ProbabilityMap& s, const MimeWeights& w)
{
    require_same_layout(w.map(), s, "mime_grad");
    const auto wv = w.map().values();
    return GradientMap(s.shape(), s.classes(), std::vector<double>(wv.begin(), wv.end()));
}

double nm_loss(const LabelMap& y, const ProbabilityMap& s)
{
    require_same_layout(y, s, "nm_loss");
    const auto yv = y.values();
    const auto sv = s.values();
    double total = 0.0;
    for (std::size_t j = 0; j < yv.size(); ++j) {
        total -= yv[j] * sv[j];
    }
    return total;
}

GradientMap nm_grad(const LabelMap& y, const ProbabilityMap& s)
{
    require_same_layout(y, s, "nm_grad");
    std::vector<double> g(y.values().size());
    const auto yv = y.values();
    for (std::size_t j = 0; j < g.size(); ++j) {
        g[j] = -yv[j];
    }
    return GradientMap(y.shape(), y.classes(), std::move(g));
}

namespace {

LossValue single_term(const LossTerm& term, const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg)
{
    switch (term.id) {
    case LossId::ce:
        return {ce_loss(y, s, cfg), ce_grad(y, s, cfg)};
    case LossId::dice:
        return {dice_loss(y, s, cfg), dice_grad(y, s, cfg)};
    case LossId::mime: {
        const MimeWeights w = MimeWeights::from_labels(y, term.mime_a, term.mime_b);
        return {mime_loss(s, w), mime_grad(s, w)};
    }
    case LossId::nm:
        return {nm_loss(y, s), nm_grad(y, s)};
    }
    throw ConfigError("combined_loss: unknown loss id");
}

}  // namespace

LossValue combined_loss(std::span<const LossTerm> terms, const LabelMap& y, const ProbabilityMap& s,
                        const LossConfig& cfg)
{
    if (terms.empty()) {
        throw ConfigError("combined_loss: at least one term is required");
    }
    if (terms.size() == 1 && terms[0].lambda == 1.0) {
        return single_term(terms[0], y, s, cfg);
    }
    double value = 0.0;
    std::vector<double> grad(y.values().size(), 0.0);
    for (const LossTerm& term : terms) {
        LossValue part = single_term(term, y, s, cfg);
        value += term.lambda * part.value;
        const auto pg = part.grad.values();
        for (std::size_t j = 0; j < grad.size(); ++j) {
            grad[j] += term.lambda * pg[j];
        }
    }
    return {value, GradientMap(y.shape(), y.classes(), std::move(grad))};
}

double combined_value(std::span<const LossTerm> terms, const LabelMap& y, const ProbabilityMap& s,
                      const LossConfig& cfg)
{
    if (terms.empty()) {
        throw ConfigError("combined_value: at least one term is required");
    }
    double value = 0.0;
    for (const LossTerm& term : terms) {
        double part = 0.0;
        switch (term.id) {
        case LossId::ce:
            part = ce_loss(y, s, cfg);
            break;
        case LossId::dice:
            part = dice_loss(y, s, cfg);
            break;
        case LossId::mime:
            part = mime_loss(s, MimeWeights::from_labels(y, term.mime_a, term.mime_b));
            break;
        case LossId::nm:
            part = nm_loss(y, s);
            break;
        }
        value += term.lambda * part;
    }
    return value;
}

}  // namespace seglab
