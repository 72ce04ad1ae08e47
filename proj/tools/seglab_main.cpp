// segLab: train, compare and audit segmentation losses on synthetic data.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seglab/experiment.hpp"
#include "seglab/kernels.hpp"

namespace {

struct Overrides {
    std::string loss;
    std::string opt;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> epochs;
};

void apply(seglab::ExperimentConfig& cfg, const Overrides& o)
{
    if (!o.loss.empty()) {
        seglab::set_loss(cfg, o.loss);
    }
    if (!o.opt.empty()) {
        seglab::set_optimizer(cfg, o.opt);
    }
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.dataset.seed = *o.seed;
    }
    if (!o.out.empty()) {
        cfg.output_dir = o.out;
    }
    if (o.epochs) {
        cfg.epochs = *o.epochs;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"segLab: dice loss gradients, mime losses and a desk-scale loss comparison"};
    app.require_subcommand(1);

    std::string config;
    Overrides ov;

    auto* gen = app.add_subcommand("generate", "Export the synthetic dataset as PGM files plus manifest.json");
    gen->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", ov.seed, "Override the global seed");
    gen->add_option("--out", ov.out, "Output directory");

    auto* train = app.add_subcommand("train", "Train one configuration and write its artifacts");
    train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--loss", ov.loss, "Loss override")->check(CLI::IsMember({"dice", "ce", "mime", "nm"}));
    train->add_option("--opt", ov.opt, "Optimizer override")->check(CLI::IsMember({"adam", "sgd"}));
    train->add_option("--seed", ov.seed, "Override the global seed");
    train->add_option("--out", ov.out, "Output directory");
    train->add_option("--epochs", ov.epochs, "Override the epoch count");

    std::vector<std::string> configs;
    std::string compare_out = ".";
    auto* compare = app.add_subcommand("compare", "Train several configurations and tabulate test DSC");
    compare->add_option("--configs", configs, "Experiment configs (JSON)")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", compare_out, "Directory for comparison.csv");
    compare->add_option("--epochs", ov.epochs, "Override the epoch count of every config");

    std::string audit_out;
    auto* audit = app.add_subcommand("audit", "Run the gradient audits; exit status 1 on failure");
    audit->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    audit->add_option("--seed", ov.seed, "Override the global seed");
    audit->add_option("--out", audit_out, "Output directory (default: the config's output_dir)");

    std::string checkpoint;
    std::string sample = "val_0000";
    std::string gradmap_out = "gradmap";
    auto* gradmap = app.add_subcommand("gradmap", "Export per-loss gradient maps for one sample as PFM");
    gradmap->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    gradmap->add_option("--sample", sample, "Sample id, e.g. val_0000");
    gradmap->add_option("--out", gradmap_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        seglab::configure_threads();
        if (*gen) {
            auto cfg = seglab::load_config(config);
            apply(cfg, ov);
            cfg.dataset.validate();
            seglab::run_generate(cfg, cfg.output_dir);
            std::cout << "dataset written to " << cfg.output_dir.string() << "\n";
        } else if (*train) {
            auto cfg = seglab::load_config(config);
            apply(cfg, ov);
            seglab::run_experiment(cfg, &std::cout);
        } else if (*compare) {
            std::vector<seglab::ExperimentConfig> cfgs;
            for (const auto& path : configs) {
                auto cfg = seglab::load_config(path);
                apply(cfg, ov);
                cfgs.push_back(std::move(cfg));
            }
            std::cout << seglab::run_comparison(cfgs, compare_out, &std::cout);
        } else if (*audit) {
            auto cfg = seglab::load_config(config);
            apply(cfg, ov);
            const auto outcome =
                seglab::run_audit(cfg, audit_out.empty() ? cfg.output_dir : std::filesystem::path(audit_out), &std::cout);
            return outcome.passed ? 0 : 1;
        } else if (*gradmap) {
            seglab::run_gradmap(checkpoint, sample, gradmap_out);
            std::cout << "gradient maps written to " << gradmap_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "segLab: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
