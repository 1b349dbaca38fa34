#pragma once

// Experiment configuration: a flat "key = value" file with '#' comments.
// Every key has a default; unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/nn/optim.hpp"
#include "semcom/objective.hpp"
#include "semcom/ssim.hpp"

namespace semcom {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PsnrAveraging { per_image, aggregate };

struct TrainConfig {
    LossWeights weights;
    int epochs_phase1 = 30;
    int epochs_phase2 = 30;
    int batch_size = 32;
    double learning_rate = 1e-4;
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    std::uint64_t seed = 0;
    ChannelConfig channel;
    SsimConfig ssim;
    bool reinit_decoders_phase2 = false;
    std::size_t train_limit = 0;  // 0 = whole split

    void validate() const {
        weights.validate();
        channel.validate();
        ssim.validate();
        if (epochs_phase1 < 0 || epochs_phase2 < 0) throw ArgumentError("epochs must be >= 0");
        if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
        if (!(learning_rate > 0)) throw ArgumentError("learning_rate must be > 0");
    }
};

struct EvalConfig {
    std::uint64_t eval_seed = 20250917;
    std::size_t test_limit = 0;
    int eval_batch_size = 100;
    PsnrAveraging psnr_averaging = PsnrAveraging::per_image;
    bool evaluate_noiseless = true;
};

inline const std::vector<double>& default_alpha_grid() {
    static const std::vector<double> g{0, 0.001, 0.25, 0.5, 0.75, 0.8, 0.9, 0.95, 0.99, 0.999, 1};
    return g;
}
inline const std::vector<double>& default_beta_grid() {
    static const std::vector<double> g{0, 0.25, 0.5, 0.75, 1};
    return g;
}

struct ExperimentConfig {
    TrainConfig train;
    EvalConfig eval;
    std::string dataset_root;
    std::string output_dir = "runs";
    std::vector<double> alphas = default_alpha_grid();
    std::vector<double> betas = default_beta_grid();
    int jobs = 1;

    void validate() const {
        train.validate();
        if (eval.eval_batch_size < 1) throw ArgumentError("eval_batch_size must be >= 1");
        if (alphas.empty() || betas.empty()) throw ArgumentError("alphas and betas must be non-empty");
        for (double a : alphas) LossWeights{a, 0}.validate();
        for (double b : betas) LossWeights{0, b}.validate();
        if (jobs < 1) throw ArgumentError("jobs must be >= 1");
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

inline std::string fmt_double(double d) {
    if (d == std::numeric_limits<double>::infinity()) return "inf";
    // shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        std::ostringstream t;
        t << std::setprecision(prec) << d;
        if (std::stod(t.str()) == d) return t.str();
    }
    std::ostringstream os;
    os << std::setprecision(17) << d;
    return os.str();
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_double(v[i]);
    return out;
}

}  // namespace detail

// Applies one key/value pair. Throws ConfigError for unknown keys or
// unparsable values.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    auto& t = c.train;
    if (key == "dataset_root") c.dataset_root = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "alpha") t.weights.alpha = parse_double(key, value);
    else if (key == "beta") t.weights.beta = parse_double(key, value);
    else if (key == "alphas") c.alphas = parse_list(key, value);
    else if (key == "betas") c.betas = parse_list(key, value);
    else if (key == "snr_db") t.channel.snr_db = parse_double(key, value);
    else if (key == "n_users") t.channel.n_users = static_cast<int>(parse_int(key, value));
    else if (key == "channel_uses_per_user") t.channel.channel_uses_per_user = static_cast<int>(parse_int(key, value));
    else if (key == "noise_seed") t.channel.noise_seed = parse_uint(key, value);
    else if (key == "epochs_phase1") t.epochs_phase1 = static_cast<int>(parse_int(key, value));
    else if (key == "epochs_phase2") t.epochs_phase2 = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") t.learning_rate = parse_double(key, value);
    else if (key == "optimizer") {
        try {
            t.optimizer = nn::optimizer_from_string(value);
        } catch (const ArgumentError& e) {
            throw ConfigError("key 'optimizer': " + std::string(e.what()));
        }
    }
    else if (key == "seed") t.seed = parse_uint(key, value);
    else if (key == "ssim_window_size") t.ssim.window_size = static_cast<int>(parse_int(key, value));
    else if (key == "ssim_window_sigma") t.ssim.window_sigma = parse_double(key, value);
    else if (key == "ssim_k1") t.ssim.k1 = parse_double(key, value);
    else if (key == "ssim_k2") t.ssim.k2 = parse_double(key, value);
    else if (key == "ssim_dynamic_range") t.ssim.dynamic_range = parse_double(key, value);
    else if (key == "reinit_decoders_phase2") t.reinit_decoders_phase2 = parse_bool(key, value);
    else if (key == "train_limit") t.train_limit = parse_uint(key, value);
    else if (key == "test_limit") c.eval.test_limit = parse_uint(key, value);
    else if (key == "eval_seed") c.eval.eval_seed = parse_uint(key, value);
    else if (key == "eval_batch_size") c.eval.eval_batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "evaluate_noiseless") c.eval.evaluate_noiseless = parse_bool(key, value);
    else if (key == "psnr_averaging") {
        if (value == "per_image") c.eval.psnr_averaging = PsnrAveraging::per_image;
        else if (value == "aggregate") c.eval.psnr_averaging = PsnrAveraging::aggregate;
        else throw ConfigError("key 'psnr_averaging': expected per_image or aggregate, got '" + value + "'");
    }
    else if (key == "jobs") c.jobs = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown config key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, path.string());
}

// Commented document listing every key with its current value.
inline std::string render_config(const ExperimentConfig& c) {
    using detail::fmt_double;
    const auto& t = c.train;
    std::ostringstream os;
    os << "# semcom experiment configuration\n\n"
       << "# data and outputs (dataset_root may be overridden by $" << "SEMCOM_CIFAR10_ROOT)\n"
       << "dataset_root = " << c.dataset_root << "\n"
       << "output_dir = " << c.output_dir << "\n"
       << "train_limit = " << t.train_limit << "   # 0 = all 50000 training images\n"
       << "test_limit = " << c.eval.test_limit << "    # 0 = all 10000 test images\n\n"
       << "# objective: alpha weighs reconstruction vs. classification, beta SSIM vs. MSE\n"
       << "alpha = " << fmt_double(t.weights.alpha) << "\n"
       << "beta = " << fmt_double(t.weights.beta) << "\n"
       << "alphas = " << detail::fmt_list(c.alphas) << "\n"
       << "betas = " << detail::fmt_list(c.betas) << "\n\n"
       << "# channel\n"
       << "snr_db = " << fmt_double(t.channel.snr_db) << "\n"
       << "n_users = " << t.channel.n_users << "\n"
       << "channel_uses_per_user = " << t.channel.channel_uses_per_user << "\n"
       << "noise_seed = " << t.channel.noise_seed << "\n\n"
       << "# training (300/300 epochs at full budget)\n"
       << "epochs_phase1 = " << t.epochs_phase1 << "\n"
       << "epochs_phase2 = " << t.epochs_phase2 << "\n"
       << "batch_size = " << t.batch_size << "\n"
       << "learning_rate = " << fmt_double(t.learning_rate) << "\n"
       << "optimizer = " << nn::to_string(t.optimizer) << "   # adam | sgd\n"
       << "seed = " << t.seed << "\n"
       << "reinit_decoders_phase2 = " << (t.reinit_decoders_phase2 ? "true" : "false") << "\n\n"
       << "# SSIM window (loss and metric)\n"
       << "ssim_window_size = " << t.ssim.window_size << "\n"
       << "ssim_window_sigma = " << fmt_double(t.ssim.window_sigma) << "\n"
       << "ssim_k1 = " << fmt_double(t.ssim.k1) << "\n"
       << "ssim_k2 = " << fmt_double(t.ssim.k2) << "\n"
       << "ssim_dynamic_range = " << fmt_double(t.ssim.dynamic_range) << "\n\n"
       << "# evaluation\n"
       << "eval_seed = " << c.eval.eval_seed << "\n"
       << "eval_batch_size = " << c.eval.eval_batch_size << "\n"
       << "evaluate_noiseless = " << (c.eval.evaluate_noiseless ? "true" : "false") << "\n"
       << "psnr_averaging = " << (c.eval.psnr_averaging == PsnrAveraging::per_image ? "per_image" : "aggregate")
       << "   # per_image | aggregate\n\n"
       << "jobs = " << c.jobs << "\n";
    return os.str();
}

// Everything that determines a trained model (used for run directories,
// checkpoint compatibility and the config hash in outputs).
inline nlohmann::json training_json(const TrainConfig& t) {
    return {
        {"alpha", t.weights.alpha},
        {"beta", t.weights.beta},
        {"snr_db", detail::fmt_double(t.channel.snr_db)},
        {"n_users", t.channel.n_users},
        {"channel_uses_per_user", t.channel.channel_uses_per_user},
        {"noise_seed", t.channel.noise_seed},
        {"epochs_phase1", t.epochs_phase1},
        {"epochs_phase2", t.epochs_phase2},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"optimizer", nn::to_string(t.optimizer)},
        {"seed", t.seed},
        {"ssim_window_size", t.ssim.window_size},
        {"ssim_window_sigma", t.ssim.window_sigma},
        {"ssim_k1", t.ssim.k1},
        {"ssim_k2", t.ssim.k2},
        {"ssim_dynamic_range", t.ssim.dynamic_range},
        {"reinit_decoders_phase2", t.reinit_decoders_phase2},
        {"train_limit", t.train_limit},
    };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig t;
    t.weights = {j.at("alpha").get<double>(), j.at("beta").get<double>()};
    t.channel.snr_db = detail::parse_double("snr_db", j.at("snr_db").get<std::string>());
    t.channel.n_users = j.at("n_users").get<int>();
    t.channel.channel_uses_per_user = j.at("channel_uses_per_user").get<int>();
    t.channel.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    t.epochs_phase1 = j.at("epochs_phase1").get<int>();
    t.epochs_phase2 = j.at("epochs_phase2").get<int>();
    t.batch_size = j.at("batch_size").get<int>();
    t.learning_rate = j.at("learning_rate").get<double>();
    t.optimizer = nn::optimizer_from_string(j.at("optimizer").get<std::string>());
    t.seed = j.at("seed").get<std::uint64_t>();
    t.ssim = {j.at("ssim_window_size").get<int>(), j.at("ssim_window_sigma").get<double>(), j.at("ssim_k1").get<double>(),
              j.at("ssim_k2").get<double>(), j.at("ssim_dynamic_range").get<double>()};
    t.reinit_decoders_phase2 = j.at("reinit_decoders_phase2").get<bool>();
    t.train_limit = j.at("train_limit").get<std::size_t>();
    return t;
}

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline std::string config_hash(const TrainConfig& t) { return fnv1a_hex(training_json(t).dump()); }

// SSIM configs that produce comparable metrics share this tag.
inline std::string ssim_tag(const SsimConfig& s) {
    using detail::fmt_double;
    return std::to_string(s.window_size) + "/" + fmt_double(s.window_sigma) + "/" + fmt_double(s.k1) + "/" +
           fmt_double(s.k2) + "/" + fmt_double(s.dynamic_range);
}

}  // namespace semcom
