#pragma once

// Two-phase schedule:
//   phase 1: every encoder and both decoders trained end to end on
//            alpha * reconstruction + (1 - alpha) * cross-entropy;
//   phase 2: encoders frozen (inference mode, no updates), the reconstruction
//            decoder trained on the reconstruction loss alone and the
//            classification decoder on cross-entropy alone.
// Channel noise is redrawn for every batch from a seed derived from
// (seed, noise_seed, phase, epoch, batch), so resuming from a checkpoint
// replays exactly the same noise.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "semcom/checkpoint.hpp"
#include "semcom/cifar10.hpp"
#include "semcom/config.hpp"
#include "semcom/nn/optim.hpp"
#include "semcom/objective.hpp"
#include "semcom/system.hpp"

namespace semcom {

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochLog {
    int phase = 1;
    int epoch = 0;  // 1-based within the phase
    std::size_t batches = 0;
    double loss = 0;
    double reconstruction = 0;
    double mse = 0;
    double ssim = 0;
    double cross_entropy = 0;
    double seconds = 0;
    std::optional<double> heldout_loss;

    nlohmann::json to_json() const {
        nlohmann::json j{{"phase", phase},   {"epoch", epoch}, {"batches", batches}, {"loss", loss},
                {"reconstruction", reconstruction},   {"mse", mse},         {"ssim", ssim},
                {"cross_entropy", cross_entropy},     {"seconds", seconds}};
        j["heldout_loss"] = heldout_loss ? nlohmann::json(*heldout_loss) : nlohmann::json(nullptr);
        return j;
    }
};

struct StepResult {
    double loss = 0;
    ReconstructionTerms reconstruction;
    double cross_entropy = 0;
};

template <std::floating_point T>
class Trainer {
public:
    explicit Trainer(TrainConfig cfg)
        : cfg_(std::move(cfg)), kernel_((cfg_.validate(), cfg_.ssim)), system_(cfg_.channel, derive_seed(cfg_.seed, {0x494e4954ULL})) {
        phase1_opt_.emplace(system_.all_refs().params, cfg_.optimizer, cfg_.learning_rate);
    }

    SemcomSystem<T>& system() { return system_; }
    const TrainConfig& config() const { return cfg_; }
    const SsimKernel& kernel() const { return kernel_; }
    int phase1_epochs_done() const { return phase1_done_; }
    int phase2_epochs_done() const { return phase2_done_; }
    bool finished() const { return phase1_done_ >= cfg_.epochs_phase1 && phase2_done_ >= cfg_.epochs_phase2; }

    // Objective of the current phase on a fixed batch, inference mode.
    double heldout_loss(const ImageBatch<T>& batch, std::uint64_t noise) {
        Rng rng(noise);
        auto fp = system_.forward(batch.pixels, Mode::inference, rng);
        if (phase2_opt_) {
            const auto r = reconstruction_loss(batch.pixels, fp.reconstruction, cfg_.weights.beta, kernel_);
            return r.loss + classification_cross_entropy(fp.probs, batch.labels);
        }
        return total_loss(batch.pixels, fp.reconstruction, fp.probs, batch.labels, cfg_.weights, kernel_, false).total;
    }

    // Called after every completed epoch (logging, checkpointing).
    std::function<void(const EpochLog&)> on_epoch;

    std::uint64_t noise_seed(int phase, int epoch, std::size_t batch) const {
        return derive_seed(cfg_.seed, {0x4e4f495345ULL, cfg_.channel.noise_seed, static_cast<std::uint64_t>(phase),
                                       static_cast<std::uint64_t>(epoch), batch});
    }

    // One phase-1 update on a batch.
    StepResult step_phase1(const ImageBatch<T>& batch, std::uint64_t noise) {
        auto refs = system_.all_refs();
        refs.zero_grad();
        Rng rng(noise);
        auto fp = system_.forward(batch.pixels, Mode::train_all, rng);
        auto loss = total_loss(batch.pixels, fp.reconstruction, fp.probs, batch.labels, cfg_.weights, kernel_);
        StepResult r{loss.total, loss.reconstruction, loss.cross_entropy};
        require_finite(r, 1);
        // exactly-zero branches are skipped (alpha = 0 or 1)
        if (cfg_.weights.alpha == 0) loss.grad_v = Tensor<T>{};
        if (cfg_.weights.alpha == 1) loss.grad_probs = Tensor<T>{};
        system_.backward(loss.grad_v, loss.grad_probs, true);
        phase1_opt_->step();
        require_finite_params(refs, 1);
        ++step_index_;
        return r;
    }

    // One phase-2 update: decoders only, each on its own loss.
    StepResult step_phase2(const ImageBatch<T>& batch, std::uint64_t noise) {
        ensure_phase2_optimizer();
        auto refs = system_.decoder_refs();
        refs.zero_grad();
        Rng rng(noise);
        auto fp = system_.forward(batch.pixels, Mode::train_decoders, rng);
        Tensor<T> grad_v, grad_probs;
        StepResult r;
        r.reconstruction = reconstruction_loss(batch.pixels, fp.reconstruction, cfg_.weights.beta, kernel_, &grad_v);
        r.cross_entropy = classification_cross_entropy(fp.probs, batch.labels, &grad_probs);
        r.loss = r.reconstruction.loss + r.cross_entropy;
        require_finite(r, 2);
        system_.backward(grad_v, grad_probs, false);
        phase2_opt_->step();
        require_finite_params(refs, 2);
        ++step_index_;
        return r;
    }

    EpochLog run_epoch(const Cifar10Set& data, int phase) {
        const int epoch = (phase == 1 ? phase1_done_ : phase2_done_) + 1;
        const auto start = std::chrono::steady_clock::now();
        BatchStream<T> stream(data, static_cast<std::size_t>(cfg_.batch_size),
                              derive_seed(cfg_.seed, {0x53485546ULL, static_cast<std::uint64_t>(phase)}),
                              static_cast<std::uint64_t>(epoch));
        EpochLog log;
        log.phase = phase;
        log.epoch = epoch;
        ImageBatch<T> batch;
        step_index_ = 0;
        epoch_ = epoch;
        phase_ = phase;
        while (stream.next(batch)) {
            const auto seed = noise_seed(phase, epoch, stream.batch_index() - 1);
            const auto r = phase == 1 ? step_phase1(batch, seed) : step_phase2(batch, seed);
            log.loss += r.loss;
            log.reconstruction += r.reconstruction.loss;
            log.mse += r.reconstruction.mse;
            log.ssim += r.reconstruction.ssim;
            log.cross_entropy += r.cross_entropy;
            ++log.batches;
        }
        if (log.batches) {
            const double k = 1.0 / static_cast<double>(log.batches);
            log.loss *= k;
            log.reconstruction *= k;
            log.mse *= k;
            log.ssim *= k;
            log.cross_entropy *= k;
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        (phase == 1 ? phase1_done_ : phase2_done_) = epoch;
        if (heldout_) log.heldout_loss = heldout_loss(*heldout_, derive_seed(cfg_.seed, {0x484f4c44ULL}));
        if (on_epoch) on_epoch(log);
        return log;
    }

    // Batch whose loss is recorded after every epoch.
    void set_heldout_batch(ImageBatch<T> batch) { heldout_ = std::move(batch); }

    void train_phase1(const Cifar10Set& data) {
        while (phase1_done_ < cfg_.epochs_phase1) run_epoch(data, 1);
    }

    void train_phase2(const Cifar10Set& data) {
        if (phase1_done_ < cfg_.epochs_phase1) throw ArgumentError("phase 2 requires a completed phase 1");
        while (phase2_done_ < cfg_.epochs_phase2) run_epoch(data, 2);
    }

    void train(const Cifar10Set& data) {
        train_phase1(data);
        train_phase2(data);
    }

    // ---- checkpoints -------------------------------------------------------

    // Without optimizer state the checkpoint still evaluates and restores
    // weights, but further training restarts the moment estimates.
    void save(const std::filesystem::path& path, bool include_optimizer = true) {
        nlohmann::json meta{{"format", "semcom-checkpoint"},
                            {"version", 1},
                            {"config", training_json(cfg_)},
                            {"config_hash", config_hash(cfg_)},
                            {"phase1_epochs_done", phase1_done_},
                            {"phase2_epochs_done", phase2_done_},
                            {"phase1_steps", phase1_opt_->steps()},
                            {"phase2_started", phase2_opt_.has_value()},
                            {"phase2_steps", phase2_opt_ ? phase2_opt_->steps() : 0},
                            {"optimizer_state", include_optimizer},
                            {"rng", {{"kind", "derived"}, {"seed", cfg_.seed}, {"noise_seed", cfg_.channel.noise_seed}}}};
        std::vector<std::pair<std::string, const Tensor<T>*>> tensors;
        auto refs = system_.all_refs();
        for (auto* p : refs.params) tensors.emplace_back(p->name, &p->value);
        for (auto* b : refs.buffers) tensors.emplace_back(b->name, &b->value);
        if (include_optimizer) {
            add_moments(tensors, *phase1_opt_, "opt_phase1");
            if (phase2_opt_) add_moments(tensors, *phase2_opt_, "opt_phase2");
        }
        write_archive<T>(path, meta, tensors);
    }

    // Restores a checkpoint written by save(). When expected is given the
    // stored training configuration must equal it.
    static Trainer load(const std::filesystem::path& path, const std::optional<TrainConfig>& expected = {}) {
        auto ar = read_archive<T>(path);
        if (ar.meta.value("format", "") != "semcom-checkpoint") throw CheckpointError(path.string() + ": unknown format");
        const TrainConfig stored = train_config_from_json(ar.meta.at("config"));
        if (expected && training_json(*expected) != training_json(stored))
            throw CheckpointError("checkpoint " + path.string() + " was trained with a different configuration (hash " +
                                  ar.meta.value("config_hash", "?") + " vs " + config_hash(*expected) + ")");
        Trainer t(stored);
        restore_into(ar, t.system_.all_refs());
        t.phase1_done_ = ar.meta.at("phase1_epochs_done").template get<int>();
        t.phase2_done_ = ar.meta.at("phase2_epochs_done").template get<int>();
        const bool with_opt = ar.meta.value("optimizer_state", true);
        if (with_opt) restore_moments(ar, *t.phase1_opt_, "opt_phase1");
        t.phase1_opt_->set_steps(ar.meta.at("phase1_steps").template get<std::uint64_t>());
        if (ar.meta.at("phase2_started").template get<bool>()) {
            t.phase2_opt_.emplace(t.system_.decoder_refs().params, stored.optimizer, stored.learning_rate);
            if (with_opt) restore_moments(ar, *t.phase2_opt_, "opt_phase2");
            t.phase2_opt_->set_steps(ar.meta.at("phase2_steps").template get<std::uint64_t>());
        }
        return t;
    }

private:
    void ensure_phase2_optimizer() {
        if (phase2_opt_) return;
        if (cfg_.reinit_decoders_phase2) {
            system_.reinit_recon_decoder(derive_seed(cfg_.seed, {0x5245494e4954ULL}));
            system_.reinit_class_decoder(derive_seed(cfg_.seed, {0x5245494e4954ULL}));
        }
        phase2_opt_.emplace(system_.decoder_refs().params, cfg_.optimizer, cfg_.learning_rate);
    }

    static void add_moments(std::vector<std::pair<std::string, const Tensor<T>*>>& out, nn::Optimizer<T>& opt,
                            const std::string& prefix) {
        if (opt.kind() != nn::OptimizerKind::adam) return;
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            out.emplace_back(prefix + ".m." + opt.params()[i]->name, &opt.first_moments()[i]);
            out.emplace_back(prefix + ".v." + opt.params()[i]->name, &opt.second_moments()[i]);
        }
    }

    static void restore_moments(const Archive<T>& ar, nn::Optimizer<T>& opt, const std::string& prefix) {
        if (opt.kind() != nn::OptimizerKind::adam) return;
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            const auto& name = opt.params()[i]->name;
            for (auto [tag, dst] : {std::pair{".m.", &opt.first_moments()[i]}, std::pair{".v.", &opt.second_moments()[i]}}) {
                const auto it = ar.tensors.find(prefix + tag + name);
                if (it == ar.tensors.end()) throw CheckpointError("checkpoint lacks optimizer state for " + name);
                if (it->second.shape() != dst->shape()) throw CheckpointError("optimizer state shape mismatch for " + name);
                *dst = it->second;
            }
        }
    }

    void require_finite(const StepResult& r, int phase) const {
        if (std::isfinite(r.loss)) return;
        std::ostringstream os;
        os << "non-finite loss in phase " << phase << ", epoch " << epoch_ << ", batch " << step_index_
           << ": total=" << r.loss << " mse=" << r.reconstruction.mse << " ssim=" << r.reconstruction.ssim
           << " cross_entropy=" << r.cross_entropy;
        throw TrainingDiverged(os.str());
    }

    void require_finite_params(const nn::ParamRefs<T>& refs, int phase) const {
        for (const auto* p : refs.params)
            for (T v : p->value.vec())
                if (!std::isfinite(v))
                    throw TrainingDiverged("non-finite value in " + p->name + " after phase " + std::to_string(phase) +
                                           " update (epoch " + std::to_string(epoch_) + ", batch " +
                                           std::to_string(step_index_) + ")");
    }

    TrainConfig cfg_;
    SsimKernel kernel_;
    SemcomSystem<T> system_;
    std::optional<nn::Optimizer<T>> phase1_opt_, phase2_opt_;
    std::optional<ImageBatch<T>> heldout_;
    int phase1_done_ = 0, phase2_done_ = 0;
    int phase_ = 1, epoch_ = 0;
    std::size_t step_index_ = 0;
};

}  // namespace semcom
