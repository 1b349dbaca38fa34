#pragma once

// Run directories and the (alpha, beta) sweep.
//
// <output_dir>/runs/a<alpha>_b<beta>_<hash>/
//     checkpoint.bin     latest epoch boundary, replaced atomically; once the
//                        run is complete it keeps weights only
//     train_log.jsonl    one EpochLog per completed epoch
//     metrics.jsonl      final records; its presence marks the run complete
// <output_dir>/results.jsonl   consolidated records of every finished pair
// <output_dir>/failures.jsonl  pairs that threw, with the message

#include <atomic>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "semcom/evaluation.hpp"
#include "semcom/training.hpp"

namespace semcom {

struct Splits {
    Cifar10Set train, test;
};

// Loads both splits from the configured root (or the environment override)
// and applies train_limit / test_limit.
inline Splits load_splits(const ExperimentConfig& cfg) {
    const auto root = resolve_dataset_root(cfg.dataset_root);
    if (root.empty())
        throw ConfigError("missing dataset root: set 'dataset_root' in the config file or " + std::string(kDatasetRootEnv));
    Splits s{load_dataset(root, Split::train), load_dataset(root, Split::test)};
    if (cfg.train.train_limit) s.train.truncate(cfg.train.train_limit);
    if (cfg.eval.test_limit) s.test.truncate(cfg.eval.test_limit);
    return s;
}

inline std::filesystem::path run_directory(const std::filesystem::path& output_dir, const TrainConfig& t) {
    using detail::fmt_double;
    return output_dir / "runs" /
           ("a" + fmt_double(t.weights.alpha) + "_b" + fmt_double(t.weights.beta) + "_" + config_hash(t));
}

struct RunOutcome {
    std::vector<MetricsRecord> records;  // noisy first, then noiseless if enabled
    bool reused = false;                 // loaded from a completed run directory
    std::filesystem::path run_dir;
};

inline void write_records_atomically(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
    std::string text;
    for (const auto& r : records) text += nlohmann::json(r).dump() + "\n";
    atomic_write(path, text);
}

using ProgressSink = std::function<void(const std::string&)>;

// Trains (resuming from the run directory's checkpoint when present) and
// evaluates one configuration. A completed run is returned without work.
inline RunOutcome run_experiment(const TrainConfig& train_cfg, const EvalConfig& eval_cfg, const Cifar10Set& train_set,
                                 const Cifar10Set& test_set, const std::filesystem::path& output_dir,
                                 const ProgressSink& progress = {}) {
    train_cfg.validate();
    RunOutcome out;
    out.run_dir = run_directory(output_dir, train_cfg);
    const auto metrics_path = out.run_dir / "metrics.jsonl";
    const auto ckpt_path = out.run_dir / "checkpoint.bin";
    if (std::filesystem::exists(metrics_path)) {
        out.records = load_records(metrics_path);
        out.reused = true;
        return out;
    }
    std::filesystem::create_directories(out.run_dir);
    const auto start = std::chrono::steady_clock::now();

    auto trainer = std::filesystem::exists(ckpt_path) ? Trainer<float>::load(ckpt_path, train_cfg) : Trainer<float>(train_cfg);
    if (test_set.size() > 0) {
        std::vector<std::size_t> idx(std::min<std::size_t>(test_set.size(), static_cast<std::size_t>(train_cfg.batch_size)));
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        trainer.set_heldout_batch(test_set.gather<float>(idx));
    }
    const auto log_path = out.run_dir / "train_log.jsonl";
    trainer.on_epoch = [&](const EpochLog& log) {
        trainer.save(ckpt_path);
        std::ofstream(log_path, std::ios::app) << log.to_json().dump() << "\n";
        if (progress) progress(out.run_dir.filename().string() + " " + log.to_json().dump());
    };
    trainer.train(train_set);
    trainer.save(ckpt_path, false);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto noisy = evaluate_system(trainer.system(), test_set, eval_cfg, train_cfg.ssim, false);
    out.records.push_back(make_record(train_cfg, eval_cfg, noisy, false, wall));
    if (eval_cfg.evaluate_noiseless) {
        const auto clean = evaluate_system(trainer.system(), test_set, eval_cfg, train_cfg.ssim, true);
        out.records.push_back(make_record(train_cfg, eval_cfg, clean, true, wall));
    }
    write_records_atomically(out.records, metrics_path);
    return out;
}

struct SweepFailure {
    double alpha = 0, beta = 0;
    std::string message;
};

struct SweepResult {
    std::vector<MetricsRecord> records;
    std::vector<SweepFailure> failures;
    std::size_t trained = 0;  // pairs computed in this invocation
    std::size_t reused = 0;   // pairs found complete on disk
};

// Every (alpha, beta) pair of the grids, betas outermost. Up to cfg.jobs pairs
// train concurrently; finished pairs are appended to results.jsonl at once.
inline SweepResult sweep(const ExperimentConfig& cfg, const Cifar10Set& train_set, const Cifar10Set& test_set,
                         const ProgressSink& progress = {}) {
    cfg.validate();
    if (cfg.alphas.empty() || cfg.betas.empty()) throw ConfigError("sweep needs non-empty alpha and beta grids");
    std::vector<TrainConfig> pairs;
    for (double b : cfg.betas)
        for (double a : cfg.alphas) {
            TrainConfig t = cfg.train;
            t.weights = {a, b};
            pairs.push_back(t);
        }

    const auto results_path = std::filesystem::path(cfg.output_dir) / "results.jsonl";
    const auto failures_path = std::filesystem::path(cfg.output_dir) / "failures.jsonl";
    std::filesystem::create_directories(cfg.output_dir);
    std::set<std::pair<std::string, bool>> consolidated;
    if (std::filesystem::exists(results_path))
        for (const auto& r : load_records(results_path)) consolidated.emplace(r.config_hash, r.noiseless);

    SweepResult result;
    std::vector<std::optional<RunOutcome>> outcomes(pairs.size());
    std::mutex m;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pairs.size(); i = next++) {
            try {
                auto o = run_experiment(pairs[i], cfg.eval, train_set, test_set, cfg.output_dir, progress);
                std::lock_guard lock(m);
                for (const auto& r : o.records)
                    if (consolidated.emplace(r.config_hash, r.noiseless).second) persist_record(r, results_path);
                (o.reused ? result.reused : result.trained) += 1;
                outcomes[i] = std::move(o);
            } catch (const std::exception& e) {
                std::lock_guard lock(m);
                SweepFailure f{pairs[i].weights.alpha, pairs[i].weights.beta, e.what()};
                std::ofstream(failures_path, std::ios::app)
                    << nlohmann::json{{"alpha", f.alpha}, {"beta", f.beta}, {"error", f.message}}.dump() << "\n";
                if (progress) progress("pair alpha=" + detail::fmt_double(f.alpha) + " beta=" + detail::fmt_double(f.beta) +
                                       " failed: " + f.message);
                result.failures.push_back(std::move(f));
            }
        }
    };
    const auto jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t j = 0; j < std::min(jobs, pairs.size()); ++j) threads.emplace_back(worker);
    }
    for (auto& o : outcomes)
        if (o) result.records.insert(result.records.end(), o->records.begin(), o->records.end());
    return result;
}

}  // namespace semcom
