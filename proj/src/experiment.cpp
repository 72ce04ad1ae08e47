#include "seglab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>

#include "seglab/net.hpp"
#include "seglab/rng.hpp"

namespace seglab {

namespace {

using ojson = nlohmann::ordered_json;

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << text;
}

LossTerm parse_term(const nlohmann::json& j)
{
    LossTerm t;
    t.id = parse_loss_id(j.at("id").get<std::string>());
    t.lambda = j.value("lambda", 1.0);
    t.mime_a = j.value("a", 1.9);
    t.mime_b = j.value("b", 0.1);
    return t;
}

ojson term_to_json(const LossTerm& t)
{
    ojson j;
    j["id"] = to_string(t.id);
    j["lambda"] = t.lambda;
    if (t.id == LossId::mime) {
        j["a"] = t.mime_a;
        j["b"] = t.mime_b;
    }
    return j;
}

bool uses_loss(const ExperimentConfig& cfg, LossId id)
{
    return std::any_of(cfg.terms.begin(), cfg.terms.end(), [&](const LossTerm& t) { return t.id == id; });
}

DatasetSpec dataset_from_json(const nlohmann::json& j, std::uint64_t fallback_seed)
{
    DatasetSpec d;
    d.kind = parse_dataset_kind(j.value("kind", std::string("acdc_like")));
    if (j.contains("image_size")) {
        d.image_size = j.at("image_size").get<std::array<int, 2>>();
    }
    d.train = j.value("train", d.train);
    d.val = j.value("val", d.val);
    d.test = j.value("test", d.test);
    d.noise_sigma = j.value("noise_sigma", d.noise_sigma);
    d.seed = j.value("seed", fallback_seed);
    return d;
}

ojson dataset_to_json(const DatasetSpec& d)
{
    ojson j;
    j["kind"] = to_string(d.kind);
    j["image_size"] = d.image_size;
    j["train"] = d.train;
    j["val"] = d.val;
    j["test"] = d.test;
    j["noise_sigma"] = d.noise_sigma;
    j["seed"] = d.seed;
    return j;
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j)
{
    if (j.is_string()) {
        return parse_optimizer_kind(j.get<std::string>()) == OptimizerKind::sgd ? OptimizerConfig::sgd_default()
                                                                                : OptimizerConfig::adam_default();
    }
    const OptimizerKind kind = parse_optimizer_kind(j.value("kind", std::string("adam")));
    OptimizerConfig o = kind == OptimizerKind::sgd ? OptimizerConfig::sgd_default() : OptimizerConfig::adam_default();
    o.eta = j.value("eta", o.eta);
    o.lambda = j.value("lambda", o.lambda);
    o.momentum = j.value("momentum", o.momentum);
    o.weight_decay = j.value("weight_decay", o.weight_decay);
    o.beta1 = j.value("beta1", o.beta1);
    o.beta2 = j.value("beta2", o.beta2);
    o.adam_eps = j.value("adam_eps", o.adam_eps);
    return o;
}

ojson optimizer_to_json(const OptimizerConfig& o)
{
    ojson j;
    j["kind"] = to_string(o.kind);
    j["eta"] = o.eta;
    j["lambda"] = o.lambda;
    if (o.kind == OptimizerKind::sgd) {
        j["momentum"] = o.momentum;
    } else {
        j["beta1"] = o.beta1;
        j["beta2"] = o.beta2;
        j["adam_eps"] = o.adam_eps;
    }
    j["weight_decay"] = o.weight_decay;
    return j;
}

// Runs body(i) for i in [0, n) on the OpenMP team and rethrows the first failure.
template <typename Body>
void parallel_for(std::size_t n, Body&& body)
{
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

ProbabilityMap predict(const SegNet& net, const Image& image)
{
    return softmax(forward(net, image).logits);
}

// Mean per-class validation DSC (classes 1..K) and the object mean.
std::pair<std::vector<double>, double> validate_net(const SegNet& net, const std::vector<Sample>& val)
{
    std::vector<std::vector<double>> per_sample(val.size());
    parallel_for(val.size(), [&](std::size_t i) {
        per_sample[i] = dsc(val[i].label, argmax_predict(predict(net, val[i].image)));
    });
    const int kt = net.classes().total();
    std::vector<double> mean(static_cast<std::size_t>(kt - 1), 0.0);
    for (const auto& d : per_sample) {
        for (int k = 1; k < kt; ++k) {
            mean[k - 1] += d[k];
        }
    }
    double overall = 0.0;
    for (double& m : mean) {
        m /= static_cast<double>(val.size());
        overall += m;
    }
    return {mean, overall / static_cast<double>(mean.size())};
}

std::vector<LossTerm> single(LossId id)
{
    LossTerm t;
    t.id = id;
    return {t};
}

// Losses whose gradient maps are exported for analysis.
std::vector<std::pair<std::string, std::vector<LossTerm>>> analysis_losses(const ClassSet& classes)
{
    std::vector<std::pair<std::string, std::vector<LossTerm>>> out{
        {"ce", single(LossId::ce)}, {"dice", single(LossId::dice)}, {"mime", single(LossId::mime)}};
    if (classes.objects() >= 2) {
        out.emplace_back("nm", single(LossId::nm));
    }
    return out;
}

ojson export_gradmaps(const LabelMap& y, const ProbabilityMap& s, const std::string& id,
                      const std::filesystem::path& dir, const LossConfig& lcfg)
{
    ojson summary;
    summary["sample"] = id;
    for (const auto& [name, terms] : analysis_losses(y.classes())) {
        const LossValue lv = combined_loss(terms, y, s, lcfg);
        export_gradient_map(lv.grad, dir / ("gradmap_" + id + "_" + name));
        ojson entry;
        entry["loss"] = lv.value;
        entry["dynamic_range_db"] = dynamic_range_db(lv.grad);
        entry["distinct_values"] = audit_two_valued(lv.grad, 1e-12);
        summary["losses"][name] = entry;
    }
    return summary;
}

ojson report_to_json(const ExperimentConfig& cfg, const RunResult& r)
{
    const ClassMetricReport& t = r.test;
    ojson j;
    j["loss"] = cfg.loss_name;
    j["optimizer"] = to_string(cfg.optimizer.kind);
    j["dataset"] = to_string(cfg.dataset.kind);
    j["test_samples"] = cfg.dataset.test;
    j["best_epoch"] = r.best_epoch;
    j["best_val_mean_dsc"] = r.best_val_mean;
    ojson classes = ojson::array();
    for (std::size_t k = 0; k < t.dsc.size(); ++k) {
        ojson c;
        c["class"] = k;
        c["dsc_mean"] = t.dsc[k].mean;
        c["dsc_std"] = t.dsc[k].std;
        c["clece_mean"] = t.clece[k].mean;
        c["clece_std"] = t.clece[k].std;
        c["dsc_table"] = format_percent(t.dsc[k]);
        ojson bins = ojson::array();
        for (const CalibrationBin& b : t.pooled_bins[k].bins) {
            bins.push_back({{"count", b.count}, {"confidence", b.confidence}, {"accuracy", b.accuracy}});
        }
        c["calibration_bins"] = bins;
        classes.push_back(c);
    }
    j["classes"] = classes;
    j["dsc_mean"] = {{"mean", t.dsc_mean.mean}, {"std", t.dsc_mean.std}, {"table", format_percent(t.dsc_mean)}};
    j["clece_mean"] = {{"mean", t.clece_mean.mean}, {"std", t.clece_mean.std}};
    return j;
}

}  // namespace

void ExperimentConfig::validate() const
{
    dataset.validate();
    optimizer.validate();
    if (terms.empty()) {
        throw ConfigError("config: loss needs at least one term");
    }
    for (const LossTerm& t : terms) {
        if (t.id == LossId::nm && dataset.classes().objects() < 2) {
            throw ConfigError("config: the nm loss requires K >= 2 (binary tasks collapse to trivial solutions)");
        }
        if (t.id == LossId::mime && (!(t.mime_a > 0.0) || !(t.mime_b > 0.0))) {
            throw ConfigError("config: mime needs a > 0 and b > 0");
        }
        if (!std::isfinite(t.lambda)) {
            throw ConfigError("config: loss weights must be finite");
        }
    }
    if (epochs < 0 || batch_size < 1 || patience < 1 || clece_bins < 1) {
        throw ConfigError("config: epochs >= 0, batch_size >= 1, patience >= 1 and clece_bins >= 1 are required");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("config: epsilon must be > 0");
    }
}

ExperimentConfig config_from_json(const nlohmann::json& j)
{
    ExperimentConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.dataset = dataset_from_json(j.value("dataset", nlohmann::json::object()), cfg.seed);
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        if (l.is_string()) {
            set_loss(cfg, l.get<std::string>());
        } else {
            const std::string kind = l.at("kind").get<std::string>();
            if (kind == "combined") {
                cfg.loss_name = "combined";
                cfg.terms.clear();
                for (const auto& t : l.at("terms")) {
                    cfg.terms.push_back(parse_term(t));
                }
            } else {
                set_loss(cfg, kind);
                cfg.terms[0].lambda = l.value("lambda", 1.0);
                cfg.terms[0].mime_a = l.value("a", cfg.terms[0].mime_a);
                cfg.terms[0].mime_b = l.value("b", cfg.terms[0].mime_b);
            }
        }
    }
    if (j.contains("optimizer")) {
        cfg.optimizer = optimizer_from_json(j.at("optimizer"));
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.output_dir = j.value("output_dir", cfg.output_dir.string());
    cfg.augment = j.value("augment", cfg.augment);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.clece_bins = j.value("clece_bins", cfg.clece_bins);
    return cfg;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg)
{
    ojson j;
    j["dataset"] = dataset_to_json(cfg.dataset);
    ojson loss;
    loss["kind"] = cfg.loss_name;
    ojson terms = ojson::array();
    for (const LossTerm& t : cfg.terms) {
        terms.push_back(term_to_json(t));
    }
    loss["terms"] = terms;
    j["loss"] = loss;
    j["optimizer"] = optimizer_to_json(cfg.optimizer);
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir.string();
    j["augment"] = cfg.augment;
    j["epsilon"] = cfg.epsilon;
    j["patience"] = cfg.patience;
    j["clece_bins"] = cfg.clece_bins;
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    // A saved config.json stores the loss as {"kind": .., "terms": [..]}.
    if (j.contains("loss") && j["loss"].is_object() && j["loss"].contains("terms") &&
        j["loss"].value("kind", "") != "combined") {
        const auto term = j["loss"]["terms"].at(0);
        nlohmann::json flat = term;
        flat["kind"] = term.at("id");
        j["loss"] = flat;
    }
    return config_from_json(j);
}

void set_loss(ExperimentConfig& cfg, const std::string& name)
{
    cfg.loss_name = std::string(to_string(parse_loss_id(name)));
    cfg.terms = single(parse_loss_id(name));
}

void set_optimizer(ExperimentConfig& cfg, const std::string& name)
{
    cfg.optimizer = parse_optimizer_kind(name) == OptimizerKind::sgd ? OptimizerConfig::sgd_default()
                                                                      : OptimizerConfig::adam_default();
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    const LossConfig lcfg = cfg.loss_config();
    const Dataset data = generate(cfg.dataset);
    const ClassSet classes = cfg.dataset.classes();
    const int objects = classes.objects();

    SegNet net = SegNet::he_initialized(classes, derive_seed(cfg.seed, Stream::init));
    Optimizer optimizer(cfg.optimizer, net.parameter_count());
    SchedulerState sched;
    sched.patience = cfg.patience;
    sched.current_eta = cfg.optimizer.eta;

    RunResult result;
    result.output_dir = cfg.output_dir;
    std::vector<double> best_params(net.parameters().begin(), net.parameters().end());
    result.best_val_mean = validate_net(net, data.val).second;
    result.best_epoch = 0;
    bool improved_once = false;

    const std::size_t n_train = data.train.size();
    const std::size_t P = net.parameter_count();
    std::vector<std::size_t> order(n_train);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(cfg.seed, Stream::shuffle, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_train; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle.below(i)]);
        }

        const double eta = sched.current_eta;
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), n_train - start);
            std::vector<std::vector<double>> grads(count);
            std::vector<double> losses(count);
            parallel_for(count, [&](std::size_t b) {
                const std::size_t idx = order[start + b];
                const Sample& base = data.train[idx];
                const Sample sample =
                    cfg.augment
                        ? augment(base, derive_seed(cfg.seed, Stream::augment,
                                                    static_cast<std::uint64_t>(epoch) * n_train + idx))
                        : base;
                ForwardResult fw = forward(net, sample.image);
                const ProbabilityMap s = softmax(fw.logits);
                const LossValue lv = combined_loss(cfg.terms, sample.label, s, lcfg);
                if (!std::isfinite(lv.value)) {
                    throw TrainingAbort("non-finite loss at epoch " + std::to_string(epoch) + " on " + sample.id);
                }
                losses[b] = lv.value;
                grads[b] = backward(net, fw.cache, softmax_backward(s, lv.grad));
            });
            // Fixed-order reduction: batch mean of per-image gradients.
            std::vector<double> grad(P, 0.0);
            for (std::size_t b = 0; b < count; ++b) {
                for (std::size_t j = 0; j < P; ++j) {
                    grad[j] += grads[b][j];
                }
                loss_sum += losses[b];
            }
            for (double& g : grad) {
                g /= static_cast<double>(count);
            }
            optimizer.step(net.mutable_parameters(), grad, eta);
        }

        auto [val_dsc, val_mean] = validate_net(net, data.val);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(n_train), val_dsc, val_mean, eta};
        result.log.epochs.push_back(rec);
        if (!improved_once || val_mean > result.best_val_mean) {
            improved_once = true;
            result.best_val_mean = val_mean;
            result.best_epoch = epoch;
            best_params.assign(net.parameters().begin(), net.parameters().end());
        }
        sched = scheduler_step(sched, val_mean);
        if (log) {
            *log << "epoch " << epoch << "/" << cfg.epochs << "  loss " << fmt("%.6g", rec.train_loss) << "  val dsc "
                 << fmt("%.4f", val_mean) << "  lr " << fmt("%.3g", eta) << std::endl;
        }
    }
    net.set_parameters(best_params);

    // Test with the best-validation parameters.
    std::vector<std::optional<ProbabilityMap>> probs(data.test.size());
    parallel_for(data.test.size(), [&](std::size_t i) { probs[i] = predict(net, data.test[i].image); });
    MetricAccumulator acc(classes.total(), cfg.clece_bins);
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        acc.add(data.test[i].label, *probs[i]);
    }
    result.test = acc.report();

    // Artifacts.
    std::string csv = "epoch";
    for (int k = 1; k <= objects; ++k) {
        csv += ",dsc_k" + std::to_string(k);
    }
    csv += ",dsc_mean,lr\n";
    for (const EpochRecord& r : result.log.epochs) {
        csv += std::to_string(r.epoch);
        for (double d : r.val_dsc) {
            csv += "," + fmt("%.6f", d);
        }
        csv += "," + fmt("%.6f", r.val_mean) + "," + fmt("%.6g", r.lr) + "\n";
    }
    write_text(cfg.output_dir / "val_dsc.csv", csv);
    write_text(cfg.output_dir / "test_metrics.json", report_to_json(cfg, result).dump(2) + "\n");
    write_text(cfg.output_dir / "config.json", config_to_json(cfg).dump(2) + "\n");

    ojson header;
    header["seed"] = cfg.seed;
    header["epoch"] = result.best_epoch;
    header["val_mean_dsc"] = result.best_val_mean;
    header["dataset"] = dataset_to_json(cfg.dataset);
    header["epsilon"] = cfg.epsilon;
    save_checkpoint(cfg.output_dir / "checkpoint.bin", net, header);

    const Sample& probe = data.val.front();
    const ojson summary = export_gradmaps(probe.label, predict(net, probe.image), probe.id, cfg.output_dir, lcfg);
    write_text(cfg.output_dir / "gradmaps.json", summary.dump(2) + "\n");

    if (log) {
        *log << "test dsc " << format_percent(result.test.dsc_mean) << "  (best epoch " << result.best_epoch << ")"
             << std::endl;
    }
    return result;
}

std::string run_comparison(const std::vector<ExperimentConfig>& cfgs, const std::filesystem::path& out_dir,
                           std::ostream* log)
{
    if (cfgs.empty()) {
        throw ConfigError("compare: at least one configuration is required");
    }
    const DatasetSpec& ref = cfgs.front().dataset;
    for (const ExperimentConfig& c : cfgs) {
        if (c.dataset.kind != ref.kind || c.dataset.seed != ref.seed || c.dataset.image_size != ref.image_size ||
            c.dataset.train != ref.train || c.dataset.val != ref.val || c.dataset.test != ref.test ||
            c.dataset.noise_sigma != ref.noise_sigma) {
            throw ConfigError("compare: configurations must share the dataset");
        }
    }
    const int objects = ref.classes().objects();
    std::string csv = "loss,optimizer";
    for (int k = 1; k <= objects; ++k) {
        csv += ",dsc_k" + std::to_string(k);
    }
    csv += ",dsc_mean\n";
    for (const ExperimentConfig& c : cfgs) {
        csv += c.loss_name + "," + std::string(to_string(c.optimizer.kind));
        if (uses_loss(c, LossId::nm) && objects < 2) {
            for (int k = 0; k <= objects; ++k) {
                csv += ",---";
            }
            csv += "\n";
            if (log) {
                *log << "skipping " << c.loss_name << ": nm is undefined for binary tasks" << std::endl;
            }
            continue;
        }
        if (log) {
            *log << "== " << c.loss_name << " / " << to_string(c.optimizer.kind) << " -> " << c.output_dir.string()
                 << std::endl;
        }
        const RunResult r = run_experiment(c, log);
        for (int k = 1; k <= objects; ++k) {
            csv += "," + fmt("%.6f", r.test.dsc[k].mean);
        }
        csv += "," + fmt("%.6f", r.test.dsc_mean.mean) + "\n";
    }
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "comparison.csv", csv);
    return csv;
}

AuditOutcome run_audit(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log)
{
    cfg.dataset.validate();
    const LossConfig lcfg = cfg.loss_config();
    constexpr double kStep = 1e-5;
    constexpr double kTolerance = 1e-5;
    constexpr int kInstances = 100;
    constexpr int kBoundInstances = 1000;

    AuditOutcome out;
    ojson detail;
    Rng rng(derive_seed(cfg.seed, Stream::audit));

    std::vector<std::pair<std::string, std::vector<LossTerm>>> losses{
        {"dice", single(LossId::dice)}, {"ce", single(LossId::ce)},    {"mime", single(LossId::mime)},
        {"nm", single(LossId::nm)},     {"ce+dice", {LossTerm{LossId::ce}, LossTerm{LossId::dice}}}};
    std::vector<double> worst(losses.size(), 0.0);
    int two_valued_failures = 0;

    for (int inst = 0; inst < kInstances; ++inst) {
        const GridShape shape(1 + rng.below(8), 1 + rng.below(8));
        const ClassSet classes(1 + static_cast<int>(rng.below(3)));
        const LabelMap y = random_labels(shape, classes, rng);
        const ProbabilityMap s = random_probabilities(shape, classes, rng, 0.05, 1.0);
        for (std::size_t l = 0; l < losses.size(); ++l) {
            const auto& terms = losses[l].second;
            const GradientMap analytic = combined_loss(terms, y, s, lcfg).grad;
            const GradientMap numeric = finite_diff_grad(
                [&](const ProbabilityMap& p) { return combined_value(terms, y, p, lcfg); }, s, kStep);
            worst[l] = std::max(worst[l], max_relative_error(analytic.values(), numeric.values()));
        }
        const GradientMap dg = dice_grad(y, s, lcfg);
        const std::vector<int> distinct = audit_two_valued(dg, 1e-12);
        for (int k = 0; k < classes.total(); ++k) {
            const std::size_t fg = y.class_size(k);
            const int expected = (fg > 0 && fg < y.pixel_count()) ? 2 : 1;
            two_valued_failures += distinct[k] != expected;
        }
    }

    std::size_t violations = 0;
    for (int inst = 0; inst < kBoundInstances; ++inst) {
        const GridShape shape(1 + rng.below(8), 1 + rng.below(8));
        const ClassSet classes(1 + static_cast<int>(rng.below(3)));
        const LabelMap y = random_labels(shape, classes, rng);
        const ProbabilityMap s = random_probabilities(shape, classes, rng);
        violations += audit_bound(dice_grad(y, s, lcfg), overlap_stats(y, s), 1.0 / classes.total(), lcfg.epsilon);
    }

    // Dataset sample under the initialized network.
    const Sample probe = generate_sample(cfg.dataset, Split::val, 0);
    const SegNet net = SegNet::he_initialized(cfg.dataset.classes(), derive_seed(cfg.seed, Stream::init));
    const ProbabilityMap s = predict(net, probe.image);
    const GradientMap dg = dice_grad(probe.label, s, lcfg);
    const GradientMap cg = ce_grad(probe.label, s, lcfg);
    out.report.distinct_values = audit_two_valued(dg, 1e-12);
    violations += audit_bound(dg, overlap_stats(probe.label, s), 1.0 / probe.label.class_count(), lcfg.epsilon);
    out.report.dynamic_range_db = dynamic_range_db(dg);
    out.report.bound_violations = violations;
    out.report.max_rel_error = *std::max_element(worst.begin(), worst.end());
    for (int k = 0; k < probe.label.class_count(); ++k) {
        two_valued_failures += out.report.distinct_values[k] != 2;
    }

    for (std::size_t l = 0; l < losses.size(); ++l) {
        detail["max_rel_error"][losses[l].first] = worst[l];
    }
    detail["instances"] = kInstances;
    detail["bound_instances"] = kBoundInstances;
    detail["finite_difference_step"] = kStep;
    detail["two_valued_failures"] = two_valued_failures;
    detail["sample"] = probe.id;
    detail["sample_dynamic_range_db"] = {{"dice", dynamic_range_db(dg)}, {"ce", dynamic_range_db(cg)}};

    if (out.report.max_rel_error >= kTolerance) {
        out.failures.push_back("finite-difference mismatch: max relative error " +
                               fmt("%.3g", out.report.max_rel_error));
    }
    if (violations > 0) {
        out.failures.push_back("dice gradient bound violated " + std::to_string(violations) + " times");
    }
    if (two_valued_failures > 0) {
        out.failures.push_back("dice gradient not two-valued on " + std::to_string(two_valued_failures) +
                               " class planes");
    }
    out.passed = out.failures.empty();
    detail["passed"] = out.passed;

    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "audit.json", out.report.to_json());
    write_text(out_dir / "audit_losses.json", detail.dump(2) + "\n");
    if (log) {
        *log << "max relative error " << fmt("%.3g", out.report.max_rel_error) << ", bound violations " << violations
             << ", dice range " << fmt("%.3f", out.report.dynamic_range_db) << " dB" << std::endl;
        for (const std::string& f : out.failures) {
            *log << "FAIL: " << f << std::endl;
        }
    }
    return out;
}

void run_gradmap(const std::filesystem::path& checkpoint, const std::string& sample_id,
                 const std::filesystem::path& out_dir)
{
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (!ck.header.contains("dataset")) {
        throw ConfigError("gradmap: checkpoint header has no dataset description");
    }
    const DatasetSpec spec = dataset_from_json(ck.header.at("dataset"), 0);
    const Sample sample = sample_by_id(spec, sample_id);
    LossConfig lcfg;
    lcfg.epsilon = ck.header.value("epsilon", lcfg.epsilon);
    const ProbabilityMap s = predict(ck.net, sample.image);

    std::filesystem::create_directories(out_dir);
    const std::size_t w = sample.image.shape.width();
    const std::size_t h = sample.image.shape.height();
    for (int k = 0; k < sample.label.class_count(); ++k) {
        write_pfm(out_dir / (sample.id + "_label_k" + std::to_string(k) + ".pfm"), sample.label.plane(k), w, h);
        write_pfm(out_dir / (sample.id + "_prob_k" + std::to_string(k) + ".pfm"), s.plane(k), w, h);
    }
    ojson summary;
    summary["sample"] = sample.id;
    summary["checkpoint_epoch"] = ck.header.value("epoch", 0);
    for (const auto& [name, terms] : analysis_losses(sample.label.classes())) {
        const LossValue lv = combined_loss(terms, sample.label, s, lcfg);
        export_gradient_map(lv.grad, out_dir / (sample.id + "_" + name));
        ojson entry;
        entry["loss"] = lv.value;
        entry["dynamic_range_db"] = dynamic_range_db(lv.grad);
        entry["distinct_values"] = audit_two_valued(lv.grad, 1e-12);
        summary["losses"][name] = entry;
    }
    write_text(out_dir / "gradmap.json", summary.dump(2) + "\n");
}

void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    export_dataset(generate(cfg.dataset), cfg.dataset, out_dir);
}

}  // namespace seglab
