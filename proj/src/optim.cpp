#include "seglab/optim.hpp"

#include <cmath>
#include <string>

#include "seglab/errors.hpp"

namespace seglab {

std::string_view to_string(OptimizerKind kind)
{
    return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view name)
{
    if (name == "sgd") {
        return OptimizerKind::sgd;
    }
    if (name == "adam") {
        return OptimizerKind::adam;
    }
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

OptimizerConfig OptimizerConfig::adam_default()
{
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adam;
    cfg.eta = 5e-4;
    cfg.beta1 = 0.99;
    cfg.beta2 = 0.999;
    cfg.weight_decay = 0.0;
    return cfg;
}

OptimizerConfig OptimizerConfig::sgd_default()
{
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.eta = 1e-2;
    cfg.momentum = 0.9;
    cfg.weight_decay = 5e-4;
    return cfg;
}

void OptimizerConfig::validate() const
{
    if (!(eta > 0.0)) {
        throw ConfigError("optimizer: eta must be > 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("optimizer: momentum must lie in [0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer: betas must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0) || !(adam_eps > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("optimizer: invalid weight_decay, adam_eps or lambda");
    }
}

namespace {

void check_finite(std::span<const double> grad)
{
    for (std::size_t j = 0; j < grad.size(); ++j) {
        if (!std::isfinite(grad[j])) {
            throw TrainingAbort("non-finite gradient at parameter " + std::to_string(j));
        }
    }
}

}  // namespace

void sgd_step(std::span<double> theta, std::span<const double> grad, const OptimizerConfig& cfg, SgdState& state)
{
    if (theta.size() != grad.size()) {
        throw DimensionError("sgd_step: parameter/gradient size mismatch");
    }
    check_finite(grad);
    if (state.velocity.size() != theta.size()) {
        state.velocity.assign(theta.size(), 0.0);
    }
    const double scale = cfg.eta * cfg.lambda;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        double& v = state.velocity[j];
        v = cfg.momentum * v + (grad[j] + cfg.weight_decay * theta[j]);
        theta[j] -= scale * v;
    }
}

void adam_step(std::span<double> theta, std::span<const double> grad, const OptimizerConfig& cfg, AdamState& state,
               std::int64_t t)
{
    if (theta.size() != grad.size()) {
        throw DimensionError("adam_step: parameter/gradient size mismatch");
    }
    if (t < 1) {
        throw ValidationError("adam_step: t must be >= 1");
    }
    check_finite(grad);
    if (state.m.size() != theta.size()) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double scale = cfg.eta * cfg.lambda;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double g = grad[j] + cfg.weight_decay * theta[j];
        double& m = state.m[j];
        double& v = state.v[j];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        theta[j] -= scale * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
    }
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t parameter_count) : cfg_(cfg)
{
    cfg_.validate();
    sgd_.velocity.assign(parameter_count, 0.0);
    adam_.m.assign(parameter_count, 0.0);
    adam_.v.assign(parameter_count, 0.0);
}

void Optimizer::step(std::span<double> theta, std::span<const double> grad, double eta)
{
    OptimizerConfig cfg = cfg_;
    cfg.eta = eta;
    ++t_;
    if (cfg.kind == OptimizerKind::sgd) {
        sgd_step(theta, grad, cfg, sgd_);
    } else {
        adam_step(theta, grad, cfg, adam_, t_);
    }
}

SchedulerState scheduler_step(SchedulerState state, double val_metric)
{
    if (val_metric > state.best_metric) {
        state.best_metric = val_metric;
        state.epochs_since_improvement = 0;
        return state;
    }
    if (++state.epochs_since_improvement >= state.patience) {
        state.current_eta /= 2.0;
        state.epochs_since_improvement = 0;
    }
    return state;
}

}  // namespace seglab
