#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace seglab {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double eta = 5e-4;
    // Loss weight; the update is scaled by eta * lambda.
    double lambda = 1.0;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double beta1 = 0.99;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // Adam(5e-4, betas 0.99/0.999) and SGD(1e-2, momentum 0.9, wd 5e-4).
    static OptimizerConfig adam_default();
    static OptimizerConfig sgd_default();

    // Throws ConfigError on eta <= 0 or momentum/betas outside [0, 1).
    void validate() const;
};

struct SgdState {
    std::vector<double> velocity;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

// v <- momentum v + (grad + weight_decay theta); theta <- theta - eta lambda v.
// Throws TrainingAbort on a non-finite gradient.
void sgd_step(std::span<double> theta, std::span<const double> grad, const OptimizerConfig& cfg, SgdState& state);

// Bias-corrected Adam with weight decay folded into the gradient; t >= 1.
void adam_step(std::span<double> theta, std::span<const double> grad, const OptimizerConfig& cfg, AdamState& state,
               std::int64_t t);

// Owns the state for one training run and applies the configured rule.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg, std::size_t parameter_count);

    void step(std::span<double> theta, std::span<const double> grad, double eta);
    std::int64_t steps() const { return t_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    SgdState sgd_;
    AdamState adam_;
    std::int64_t t_ = 0;
};

// Halves eta after `patience` consecutive epochs without a strict improvement.
struct SchedulerState {
    int patience = 20;
    double best_metric = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    double current_eta = 0.0;
};

SchedulerState scheduler_step(SchedulerState state, double val_metric);

}  // namespace seglab
