#include "mimolab/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace mimo {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : j.items())
        if (!known.contains(item.key()))
            throw std::invalid_argument("config: unknown key \"" + item.key() + "\" in " + where);
}

const std::set<std::string> kDetectorNames = {"zf", "mmse", "zfdf", "sd", "mld", "lisa"};

}  // namespace

void ExperimentConfig::validate() const {
    channel.validate();
    make_constellation(constellation);
    parse_variant(variant);
    if (detectors.empty()) throw std::invalid_argument("config: detector list is empty");
    for (const std::string& d : detectors)
        if (!kDetectorNames.contains(d))
            throw std::invalid_argument("config: unknown detector \"" + d + "\"");
    if (snr_grid_db.empty()) throw std::invalid_argument("config: snr_grid_db is empty");
    if (min_bits < 10000) throw std::invalid_argument("config: min_bits must be >= 10000");
    if (min_errors < 1) throw std::invalid_argument("config: min_errors must be >= 1");
    if (d_h < 1 || n_blocks < 1 || epochs < 1 || batches_per_epoch < 1 || batch_size < 1)
        throw std::invalid_argument("config: counts must be >= 1");
}

TrainConfig ExperimentConfig::to_train_config() const {
    TrainConfig tc;
    tc.variant = parse_variant(variant);
    tc.channel = channel;
    tc.constellation = make_constellation(constellation).name;
    tc.d_h = d_h;
    tc.n_blocks = n_blocks;
    tc.epochs = epochs;
    tc.batches_per_epoch = batches_per_epoch;
    tc.batch_size = batch_size;
    tc.adam = adam;
    tc.seed = seed;
    return tc;
}

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: invalid JSON: " + std::string(e.what()));
    }

    reject_unknown_keys(j,
                        {"n_t", "n_r", "channel", "constellation", "variant", "snr_grid_db",
                         "snr_range_db", "detectors", "d_h", "n_blocks", "epochs",
                         "batches_per_epoch", "batch_size", "min_bits", "min_errors", "seed",
                         "adam"},
                        "top level");

    ExperimentConfig cfg;
    if (j.contains("n_t")) cfg.channel.n_t = j["n_t"].get<std::size_t>();
    if (j.contains("n_r")) cfg.channel.n_r = j["n_r"].get<std::size_t>();

    if (j.contains("channel")) {
        const json& ch = j["channel"];
        reject_unknown_keys(ch, {"model", "alpha", "csi_error_var"}, "channel");
        if (ch.contains("model")) {
            const std::string m = ch["model"].get<std::string>();
            if (m == "iid")
                cfg.channel.model = ChannelModel::Iid;
            else if (m == "kronecker")
                cfg.channel.model = ChannelModel::Kronecker;
            else
                throw std::invalid_argument("config: unknown channel model \"" + m + "\"");
        }
        if (ch.contains("alpha")) cfg.channel.alpha = ch["alpha"].get<double>();
        if (ch.contains("csi_error_var"))
            cfg.channel.csi_error_var = ch["csi_error_var"].get<double>();
    }

    if (j.contains("snr_range_db")) {
        const auto range = j["snr_range_db"].get<std::vector<double>>();
        if (range.size() != 2)
            throw std::invalid_argument("config: snr_range_db must be [min, max]");
        cfg.channel.snr_min_db = range[0];
        cfg.channel.snr_max_db = range[1];
    }

    if (j.contains("constellation")) cfg.constellation = j["constellation"].get<std::string>();
    if (j.contains("variant")) cfg.variant = j["variant"].get<std::string>();
    if (j.contains("snr_grid_db")) cfg.snr_grid_db = j["snr_grid_db"].get<std::vector<double>>();
    if (j.contains("detectors")) cfg.detectors = j["detectors"].get<std::vector<std::string>>();
    if (j.contains("d_h")) cfg.d_h = j["d_h"].get<std::size_t>();
    if (j.contains("n_blocks")) cfg.n_blocks = j["n_blocks"].get<std::size_t>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batches_per_epoch"))
        cfg.batches_per_epoch = j["batches_per_epoch"].get<std::size_t>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("min_bits")) cfg.min_bits = j["min_bits"].get<std::uint64_t>();
    if (j.contains("min_errors")) cfg.min_errors = j["min_errors"].get<std::uint64_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();

    if (j.contains("adam")) {
        const json& a = j["adam"];
        reject_unknown_keys(a, {"lr", "beta1", "beta2", "eps", "final_lr_fraction"}, "adam");
        if (a.contains("lr")) cfg.adam.lr = a["lr"].get<double>();
        if (a.contains("beta1")) cfg.adam.beta1 = a["beta1"].get<double>();
        if (a.contains("beta2")) cfg.adam.beta2 = a["beta2"].get<double>();
        if (a.contains("eps")) cfg.adam.eps = a["eps"].get<double>();
        if (a.contains("final_lr_fraction"))
            cfg.adam.final_lr_fraction = a["final_lr_fraction"].get<double>();
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

}  // namespace mimo
