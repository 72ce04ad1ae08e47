#pragma once

// Segmentation losses over (y, s) and their analytic gradients dL/ds.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seglab/grid.hpp"

namespace seglab {

struct LossConfig {
    // Added to every dice denominator, in the loss and in the gradient.
    double epsilon = 1e-8;
    // Floor on s inside the cross-entropy log and division.
    double ce_clamp = 1e-12;

    void validate() const;
};

enum class LossId { ce, dice, mime, nm };

std::string_view to_string(LossId id);
// Throws ConfigError on an unknown name.
LossId parse_loss_id(std::string_view name);

// Precomputed mime gradient map: -a on foreground pixels of each class plane,
// +b elsewhere.
class MimeWeights {
public:
    static MimeWeights from_labels(const LabelMap& y, double a, double b);

    const GradientMap& map() const { return omega_; }
    double a() const { return a_; }
    double b() const { return b_; }

private:
    MimeWeights(GradientMap omega, double a, double b) : omega_(std::move(omega)), a_(a), b_(b) {}

    GradientMap omega_;
    double a_;
    double b_;
};

inline MimeWeights mime_weights(const LabelMap& y, double a, double b) { return MimeWeights::from_labels(y, a, b); }

// (1/|K|) sum_k (1 - 2 I_k / (U_k + eps))
double dice_loss(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg = {});
// (1/|K|) * { -2 (U_k - I_k) / (U_k + eps)^2  if y = 1;  2 I_k / (U_k + eps)^2  otherwise }
GradientMap dice_grad(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg = {});

// (1 / (|K| |Omega|)) sum -y log max(s, clamp)
double ce_loss(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg = {});
GradientMap ce_grad(const LabelMap& y, const ProbabilityMap& s, const LossConfig& cfg = {});

// omega^T s over the flattened maps.
double mime_loss(const ProbabilityMap& s, const MimeWeights& w);
GradientMap mime_grad(const ProbabilityMap& s, const MimeWeights& w);

// -y^T s
double nm_loss(const LabelMap& y, const ProbabilityMap& s);
GradientMap nm_grad(const LabelMap& y, const ProbabilityMap& s);

// One weighted term of a combined loss. The mime parameters are only read
// when id == mime.
struct LossTerm {
    LossId id = LossId::dice;
    double lambda = 1.0;
    double mime_a = 1.9;
    double mime_b = 0.1;
};

struct LossValue {
    double value;
    GradientMap grad;
};

// sum_j lambda_j L_j and sum_j lambda_j dL_j/ds.
LossValue combined_loss(std::span<const LossTerm> terms, const LabelMap& y, const ProbabilityMap& s,
                        const LossConfig& cfg = {});

// Forward value only; used by the finite-difference oracle.
double combined_value(std::span<const LossTerm> terms, const LabelMap& y, const ProbabilityMap& s,
                      const LossConfig& cfg = {});

}  // namespace seglab
