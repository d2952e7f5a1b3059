// Experiment configuration: one JSON document drives both training and BER
// sweeps. The schema is fixed; unknown keys are rejected so typos fail loudly.

#ifndef MIMOLAB_CONFIG_HPP
#define MIMOLAB_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mimolab/channel.hpp"
#include "mimolab/lisa.hpp"

namespace mimo {

struct ExperimentConfig {
    ChannelConfig channel;  // n_t, n_r, model, alpha, csi_error_var, snr range
    std::string constellation = "qpsk";
    std::string variant = "varying";
    std::vector<std::string> detectors = {"zf", "mmse", "zfdf", "sd"};
    std::vector<double> snr_grid_db = {2.0, 4.0, 6.0, 8.0};
    std::size_t d_h = 64;
    std::size_t n_blocks = 2;
    std::size_t epochs = 4;
    std::size_t batches_per_epoch = 400;
    std::size_t batch_size = 125;
    std::uint64_t min_bits = 200000;
    std::uint64_t min_errors = 100;
    std::uint64_t seed = 1;
    AdamConfig adam;

    void validate() const;  // throws std::invalid_argument
    TrainConfig to_train_config() const;
};

ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace mimo

#endif
