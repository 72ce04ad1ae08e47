#pragma once

// Experiment runner behind the segLab command line: configuration schema,
// training loop, comparison table, gradient audit and gradient-map export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seglab/gradcheck.hpp"
#include "seglab/losses.hpp"
#include "seglab/metrics.hpp"
#include "seglab/optim.hpp"
#include "seglab/synthdata.hpp"

namespace seglab {

struct ExperimentConfig {
    DatasetSpec dataset;
    // "ce", "dice", "mime", "nm" or "combined"; `terms` holds the resolved terms.
    std::string loss_name = "dice";
    std::vector<LossTerm> terms{LossTerm{}};
    OptimizerConfig optimizer = OptimizerConfig::adam_default();
    int epochs = 60;
    int batch_size = 8;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/default";
    bool augment = false;
    double epsilon = 1e-8;
    int patience = 20;
    int clece_bins = 10;

    // Throws ConfigError; nm needs K >= 2, mime needs a, b > 0.
    void validate() const;
    LossConfig loss_config() const { return LossConfig{epsilon, 1e-12}; }
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Replace the loss by a named single loss (mime uses a = 1.9, b = 0.1).
void set_loss(ExperimentConfig& cfg, const std::string& name);
// Replace the optimizer by the default Adam or SGD configuration.
void set_optimizer(ExperimentConfig& cfg, const std::string& name);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    std::vector<double> val_dsc;  // object classes 1..K
    double val_mean = 0.0;
    double lr = 0.0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
};

struct RunResult {
    RunLog log;
    ClassMetricReport test;
    double best_val_mean = 0.0;
    int best_epoch = 0;
    std::filesystem::path output_dir;
};

// Trains, validates every epoch, tests the best-validation parameters and
// writes val_dsc.csv, test_metrics.json, checkpoint.bin, config.json and the
// gradient maps of val_0000. Progress goes to `log` when given.
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Runs every configuration and writes comparison.csv into `out_dir`.
// Configurations must share the dataset. nm rows on K = 1 are reported as "---".
std::string run_comparison(const std::vector<ExperimentConfig>& cfgs, const std::filesystem::path& out_dir,
                           std::ostream* log = nullptr);

struct AuditOutcome {
    GradAuditReport report;
    bool passed = false;
    std::vector<std::string> failures;
};

// Finite-difference, two-valuedness, bound and dynamic-range audits on random
// instances and on val_0000 under the initialized network. Writes audit.json
// and audit_losses.json into `out_dir`.
AuditOutcome run_audit(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       std::ostream* log = nullptr);

// Gradient maps of every applicable loss for one sample under a checkpoint.
// Writes <id>_<loss>_k<k>.pfm, <id>_label_k<k>.pfm, <id>_prob_k<k>.pfm and gradmap.json.
void run_gradmap(const std::filesystem::path& checkpoint, const std::string& sample_id,
                 const std::filesystem::path& out_dir);

// Writes the generated dataset (PGM + manifest.json) into `out_dir`.
void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace seglab
