#pragma once

// Test-set metrics and the results file (one JSON object per line).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "semcom/cifar10.hpp"
#include "semcom/config.hpp"
#include "semcom/objective.hpp"
#include "semcom/system.hpp"

namespace semcom {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr double kPsnrMseFloor = 1e-10;

inline double psnr_from_mse(double mse) { return mse < kPsnrMseFloor ? kPsnrCapDb : 10.0 * std::log10(1.0 / mse); }

// PSNR of one image pair (or of a whole tensor taken as one image).
template <std::floating_point T>
double psnr(const Tensor<T>& s, const Tensor<T>& v) {
    if (s.shape() != v.shape()) throw ArgumentError("psnr: shape mismatch " + shape_str(s.shape()) + " vs " + shape_str(v.shape()));
    return psnr_from_mse(mse(s, v));
}

// Ties go to the lowest class index.
template <std::floating_point T>
int argmax_row(std::span<const T> row) {
    int best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

template <std::floating_point T>
std::size_t count_correct(const Tensor<T>& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2 || probs.dim(0) != labels.size())
        throw ArgumentError("accuracy: probabilities " + shape_str(probs.shape()) + " do not match " +
                            std::to_string(labels.size()) + " labels");
    std::size_t correct = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) correct += argmax_row<T>(probs.sample(n)) == labels[n];
    return correct;
}

template <std::floating_point T>
double accuracy(const Tensor<T>& probs, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    return static_cast<double>(count_correct(probs, labels)) / static_cast<double>(labels.size());
}

struct MetricsRecord {
    double alpha = 0;
    double beta = 0;
    double snr_db = 0;
    int n_users = 4;
    int channel_uses_per_user = 50;
    std::uint64_t seed = 0;
    double accuracy = 0;
    double psnr_db = 0;
    double ssim = 0;
    int epochs_phase1 = 0;
    int epochs_phase2 = 0;
    double wall_time_s = 0;
    bool noiseless = false;
    std::uint64_t eval_seed = 0;
    std::size_t test_images = 0;
    std::string psnr_averaging = "per_image";
    std::string config_hash;
    std::string ssim_tag;

    bool operator==(const MetricsRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const MetricsRecord& r) {
    j = {{"alpha", r.alpha},
         {"beta", r.beta},
         {"snr_db", r.snr_db},
         {"n_users", r.n_users},
         {"channel_uses_per_user", r.channel_uses_per_user},
         {"seed", r.seed},
         {"accuracy", r.accuracy},
         {"psnr_db", r.psnr_db},
         {"ssim", r.ssim},
         {"epochs_phase1", r.epochs_phase1},
         {"epochs_phase2", r.epochs_phase2},
         {"wall_time_s", r.wall_time_s},
         {"noiseless", r.noiseless},
         {"eval_seed", r.eval_seed},
         {"test_images", r.test_images},
         {"psnr_averaging", r.psnr_averaging},
         {"config_hash", r.config_hash},
         {"ssim_tag", r.ssim_tag}};
}

inline void from_json(const nlohmann::json& j, MetricsRecord& r) {
    j.at("alpha").get_to(r.alpha);
    j.at("beta").get_to(r.beta);
    j.at("snr_db").get_to(r.snr_db);
    j.at("n_users").get_to(r.n_users);
    j.at("channel_uses_per_user").get_to(r.channel_uses_per_user);
    j.at("seed").get_to(r.seed);
    j.at("accuracy").get_to(r.accuracy);
    j.at("psnr_db").get_to(r.psnr_db);
    j.at("ssim").get_to(r.ssim);
    j.at("epochs_phase1").get_to(r.epochs_phase1);
    j.at("epochs_phase2").get_to(r.epochs_phase2);
    j.at("wall_time_s").get_to(r.wall_time_s);
    r.noiseless = j.value("noiseless", false);
    r.eval_seed = j.value("eval_seed", std::uint64_t{0});
    r.test_images = j.value("test_images", std::size_t{0});
    r.psnr_averaging = j.value("psnr_averaging", std::string("per_image"));
    r.config_hash = j.value("config_hash", std::string());
    r.ssim_tag = j.value("ssim_tag", std::string());
    if (!(r.accuracy >= 0 && r.accuracy <= 1)) throw std::out_of_range("accuracy outside [0,1]");
    if (!(r.ssim >= -1 && r.ssim <= 1)) throw std::out_of_range("ssim outside [-1,1]");
}

class RecordParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Appends one line; the lock serializes writers inside one process and the
// single write() of a complete line keeps concurrent appenders line-atomic.
inline void persist_record(const MetricsRecord& r, const std::filesystem::path& path) {
    static std::mutex m;
    std::lock_guard lock(m);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::string line = nlohmann::json(r).dump() + "\n";
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot append to " + path.string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Blank lines are skipped; anything else malformed reports its line number.
inline std::vector<MetricsRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results file " + path.string());
    std::vector<MetricsRecord> out;
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<MetricsRecord>());
        } catch (const std::exception& e) {
            throw RecordParseError(path.string() + ":" + std::to_string(no) + ": malformed record: " + e.what());
        }
    }
    return out;
}

struct EvalSummary {
    double accuracy = 0;
    double psnr_db = 0;
    double ssim = 0;
    std::size_t images = 0;
};

// Runs the system in inference mode over a test set. Noise comes from
// eval_seed alone, so every checkpoint sees the same channel realization.
template <std::floating_point T>
EvalSummary evaluate_system(SemcomSystem<T>& sys, const Cifar10Set& data, const EvalConfig& cfg, const SsimConfig& ssim_cfg,
                            bool noiseless) {
    if (cfg.eval_batch_size < 1) throw ArgumentError("eval_batch_size must be >= 1");
    const SsimKernel kernel(ssim_cfg);
    Rng rng(derive_seed(cfg.eval_seed, {0x4556414cULL}));
    BatchStream<T> stream(data, static_cast<std::size_t>(cfg.eval_batch_size), std::nullopt, 0);
    ImageBatch<T> batch;
    double psnr_sum = 0, ssim_sum = 0, mse_sum = 0;
    std::size_t correct = 0, images = 0;
    while (stream.next(batch)) {
        auto fp = sys.forward(batch.pixels, Mode::inference, rng, !noiseless);
        correct += count_correct(fp.probs, batch.labels);
        for (double m : mse_per_sample(batch.pixels, fp.reconstruction)) {
            psnr_sum += psnr_from_mse(m);
            mse_sum += m;
        }
        for (double s : ssim_per_image(batch.pixels, fp.reconstruction, kernel.window())) ssim_sum += s;
        images += batch.size();
    }
    EvalSummary out;
    out.images = images;
    if (images == 0) return out;
    const double n = static_cast<double>(images);
    out.accuracy = static_cast<double>(correct) / n;
    out.psnr_db = cfg.psnr_averaging == PsnrAveraging::per_image ? psnr_sum / n : psnr_from_mse(mse_sum / n);
    out.ssim = ssim_sum / n;
    return out;
}

inline MetricsRecord make_record(const TrainConfig& t, const EvalConfig& e, const EvalSummary& s, bool noiseless,
                                 double wall_time_s) {
    MetricsRecord r;
    r.alpha = t.weights.alpha;
    r.beta = t.weights.beta;
    // training SNR; a perfect-channel evaluation is marked by the flag
    r.snr_db = t.channel.snr_db;
    r.n_users = t.channel.n_users;
    r.channel_uses_per_user = t.channel.channel_uses_per_user;
    r.seed = t.seed;
    r.accuracy = s.accuracy;
    r.psnr_db = s.psnr_db;
    r.ssim = s.ssim;
    r.epochs_phase1 = t.epochs_phase1;
    r.epochs_phase2 = t.epochs_phase2;
    r.wall_time_s = wall_time_s;
    r.noiseless = noiseless;
    r.eval_seed = e.eval_seed;
    r.test_images = s.images;
    r.psnr_averaging = e.psnr_averaging == PsnrAveraging::per_image ? "per_image" : "aggregate";
    r.config_hash = config_hash(t);
    r.ssim_tag = ssim_tag(t.ssim);
    return r;
}

}  // namespace semcom
