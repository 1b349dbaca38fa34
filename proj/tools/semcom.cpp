// semcom: train, sweep, evaluate, verify and plot the multi-user semantic
// communication system. Exit codes: 0 success, 1 runtime failure, 2 invalid
// configuration or input.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "semcom/experiment.hpp"
#include "semcom/plot.hpp"
#include "semcom/synthetic.hpp"
#include "semcom/verify.hpp"

using namespace semcom;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigOptions {
    std::string config_path;
    std::optional<double> alpha, beta, snr_db;
    std::optional<int> epochs_e2e, epochs_decoder, jobs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, dataset_root;
    bool paper_scale = false;

    void add_to(CLI::App& cmd, bool run_overrides) {
        cmd.add_option("--config", config_path, "experiment config file (key = value)");
        cmd.add_option("--out", out, "output directory");
        cmd.add_option("--dataset-root", dataset_root, "CIFAR-10 binary directory");
        cmd.add_flag("--paper-scale", paper_scale, "300 end-to-end and 300 decoder epochs");
        cmd.add_option("--seed", seed, "seed for initialization, shuffling and channel noise");
        cmd.add_option("--snr-db", snr_db, "training SNR per channel use in dB");
        cmd.add_option("--epochs-e2e", epochs_e2e, "end-to-end epochs");
        cmd.add_option("--epochs-decoder", epochs_decoder, "decoder-only epochs");
        cmd.add_option("--jobs", jobs, "pairs trained concurrently");
        if (run_overrides) {
            cmd.add_option("--alpha", alpha, "reconstruction weight alpha");
            cmd.add_option("--beta", beta, "SSIM weight beta");
        }
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (paper_scale) c.train.epochs_phase1 = c.train.epochs_phase2 = 300;
        if (alpha) c.train.weights.alpha = *alpha;
        if (beta) c.train.weights.beta = *beta;
        if (snr_db) c.train.channel.snr_db = *snr_db;
        if (epochs_e2e) c.train.epochs_phase1 = *epochs_e2e;
        if (epochs_decoder) c.train.epochs_phase2 = *epochs_decoder;
        if (seed) c.train.seed = *seed;
        if (jobs) c.jobs = *jobs;
        if (out) c.output_dir = *out;
        if (dataset_root) c.dataset_root = *dataset_root;
        try {
            c.validate();
        } catch (const ArgumentError& e) {
            throw ConfigError(e.what());
        }
        return c;
    }
};

void print_records(const std::vector<MetricsRecord>& records) {
    for (const auto& r : records) std::cout << nlohmann::json(r).dump() << "\n";
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int cmd_train(const ConfigOptions& opts) {
    const auto cfg = opts.resolve();
    const auto data = load_splits(cfg);
    const auto out = run_experiment(cfg.train, cfg.eval, data.train, data.test, cfg.output_dir, log_line);
    log_line(std::string(out.reused ? "reused " : "finished ") + out.run_dir.string());
    print_records(out.records);
    return 0;
}

int cmd_sweep(const ConfigOptions& opts) {
    const auto cfg = opts.resolve();
    const auto data = load_splits(cfg);
    const auto result = sweep(cfg, data.train, data.test, log_line);
    log_line("sweep: " + std::to_string(result.trained) + " trained, " + std::to_string(result.reused) + " reused, " +
             std::to_string(result.failures.size()) + " failed; results in " +
             (fs::path(cfg.output_dir) / "results.jsonl").string());
    const std::size_t pairs = cfg.alphas.size() * cfg.betas.size();
    return result.failures.size() == pairs ? kExitRuntime : 0;
}

int cmd_evaluate(const ConfigOptions& opts, const std::string& checkpoint, bool noiseless_too) {
    const auto cfg = opts.resolve();
    auto trainer = Trainer<float>::load(checkpoint);
    const auto data = load_splits(cfg);
    const auto& t = trainer.config();
    std::vector<MetricsRecord> records;
    records.push_back(make_record(t, cfg.eval, evaluate_system(trainer.system(), data.test, cfg.eval, t.ssim, false), false, 0));
    if (noiseless_too)
        records.push_back(make_record(t, cfg.eval, evaluate_system(trainer.system(), data.test, cfg.eval, t.ssim, true), true, 0));
    print_records(records);
    return 0;
}

int cmd_verify(const std::string& scale_name, std::uint64_t seed, const std::string& report_path) {
    const auto scale = verify_scale_from_string(scale_name);
    const auto report = run_property_suite(scale, seed, [](const PropertyResult& r) {
        std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << ": observed " << r.observed << " (threshold "
                  << r.threshold << ") " << r.detail << "\n";
    });
    const std::string text = report.to_json().dump(2);
    if (report_path.empty()) std::cout << text << "\n";
    else atomic_write(report_path, text + "\n");
    if (report.all_passed()) return 0;
    std::cerr << "failed properties:\n";
    for (const auto& r : report.results)
        if (!r.passed) std::cerr << "  " << r.name << " observed " << r.observed << " threshold " << r.threshold << "\n";
    return kExitRuntime;
}

int cmd_plot(const std::string& results, const std::string& out) {
    if (!fs::exists(results)) throw UsageError("results file " + results + " does not exist");
    const auto records = load_records(results);
    if (records.empty()) throw UsageError("results file " + results + " holds no records");
    write_svg(records, out);
    log_line("wrote " + out + " from " + std::to_string(records.size()) + " records");
    return 0;
}

int cmd_check_data(const ConfigOptions& opts) {
    const auto cfg = opts.resolve();
    const auto root = resolve_dataset_root(cfg.dataset_root);
    if (root.empty())
        throw ConfigError("missing dataset root: set 'dataset_root' in the config file or " + std::string(kDatasetRootEnv));
    for (const auto split : {Split::train, Split::test}) {
        const auto set = load_dataset(root, split);
        std::array<std::size_t, kNumClasses> counts{};
        for (auto l : set.labels()) ++counts.at(l);
        std::cout << (split == Split::train ? "train" : "test") << ": " << set.size() << " images, per class";
        for (auto c : counts) std::cout << " " << c;
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-user semantic communication: training, sweeps, evaluation and oracle checks"};
    app.require_subcommand(1);

    ConfigOptions train_opts, sweep_opts, eval_opts, data_opts, print_opts;
    auto* train = app.add_subcommand("train", "train and evaluate one (alpha, beta) configuration");
    train_opts.add_to(*train, true);
    auto* sweep_cmd = app.add_subcommand("sweep", "train every (alpha, beta) pair of the configured grids");
    sweep_opts.add_to(*sweep_cmd, false);

    std::string checkpoint;
    bool with_noiseless = false;
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    eval_opts.add_to(*evaluate, false);
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evaluate->add_flag("--noiseless", with_noiseless, "also evaluate over a perfect channel");

    std::string scale = "fast", report_path;
    std::uint64_t verify_seed = 0;
    auto* verify = app.add_subcommand("verify", "dataset-free property suite");
    verify->add_option("--scale", scale, "fast or thorough")->check(CLI::IsMember({"fast", "thorough"}));
    verify->add_option("--seed", verify_seed, "seed of the random test inputs");
    verify->add_option("--report", report_path, "write the JSON report here instead of stdout");

    std::string results_path, plot_out = "tradeoff.svg";
    auto* plot = app.add_subcommand("plot", "three-panel SVG of a results file");
    plot->add_option("results", results_path, "results.jsonl")->required();
    plot->add_option("-o,--out", plot_out, "output SVG path");

    auto* check = app.add_subcommand("check-data", "validate the dataset directory and count labels");
    data_opts.add_to(*check, false);

    std::string synth_dir;
    std::size_t synth_train = 1000, synth_test = 1000;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("make-synthetic", "write a synthetic dataset in the CIFAR-10 binary layout");
    synth->add_option("dir", synth_dir, "output directory")->required();
    synth->add_option("--train-per-file", synth_train, "images in each of the five train files");
    synth->add_option("--test", synth_test, "test images");
    synth->add_option("--seed", synth_seed, "generator seed");

    auto* print = app.add_subcommand("print-config", "print the resolved configuration with every key");
    print_opts.add_to(*print, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_opts);
        if (*sweep_cmd) return cmd_sweep(sweep_opts);
        if (*evaluate) return cmd_evaluate(eval_opts, checkpoint, with_noiseless);
        if (*verify) return cmd_verify(scale, verify_seed, report_path);
        if (*plot) return cmd_plot(results_path, plot_out);
        if (*check) return cmd_check_data(data_opts);
        if (*synth) {
            write_synthetic_dataset(synth_dir, synth_train, synth_test, synth_seed);
            return 0;
        }
        if (*print) {
            std::cout << render_config(print_opts.resolve());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PlotError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const UnsupportedConfiguration& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
