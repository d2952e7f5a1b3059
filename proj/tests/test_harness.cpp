#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mimolab/checkpoint.hpp"
#include "mimolab/config.hpp"
#include "mimolab/sweep.hpp"

using namespace mimo;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("mimolab_test_" + name)).string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

ExperimentConfig small_sweep_config() {
    ExperimentConfig cfg;
    cfg.channel.n_t = 2;
    cfg.channel.n_r = 2;
    cfg.detectors = {"zf", "zfdf"};
    cfg.snr_grid_db = {4.0, 8.0};
    cfg.min_bits = 10000;
    cfg.min_errors = 10;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise lossless") {
    const LisaModel m =
        init_lisa_model(LisaVariant::Varying, 2, 6, 2, Modulation::QAM16, Rng(3));
    const std::string path = tmp_path("roundtrip.ckpt");
    save_checkpoint(m, {1234, 3, 120}, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.pack() == m.pack());
    CHECK(back.model.n_t == 2);
    CHECK(back.model.d_h == 6);
    CHECK(back.model.n_blocks == 2);
    CHECK(back.model.constellation == Modulation::QAM16);
    CHECK(back.progress.seed == 1234);
    CHECK(back.progress.epochs == 3);
    CHECK(back.progress.batches == 120);
    fs::remove(path);
}

TEST_CASE("fixed-variant checkpoints round trip too") {
    const LisaModel m = init_lisa_model(LisaVariant::Fixed, 2, 5, 1, Modulation::QPSK, Rng(4));
    const std::string path = tmp_path("fixed.ckpt");
    save_checkpoint(m, {9, 1, 10}, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.variant == LisaVariant::Fixed);
    CHECK(back.model.pack() == m.pack());
    fs::remove(path);
}

TEST_CASE("truncated checkpoints are rejected without a partial model") {
    const LisaModel m = init_lisa_model(LisaVariant::Varying, 2, 4, 1, Modulation::QPSK, Rng(5));
    const std::string path = tmp_path("truncated.ckpt");
    save_checkpoint(m, {}, path);
    const std::string blob = read_file(path);
    write_file(path, blob.substr(0, blob.size() - 8));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("payload"),
                         std::runtime_error);
    fs::remove(path);
}

TEST_CASE("corrupt magic and unsupported versions are rejected") {
    const LisaModel m = init_lisa_model(LisaVariant::Varying, 2, 4, 1, Modulation::QPSK, Rng(6));
    const std::string path = tmp_path("magic.ckpt");
    save_checkpoint(m, {}, path);
    std::string blob = read_file(path);

    std::string bad_magic = blob;
    bad_magic[0] = 'X';
    write_file(path, bad_magic);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);

    std::string bad_version = blob;
    bad_version[4] = 9;
    write_file(path, bad_version);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("metadata and payload sizes must agree") {
    // metadata promises d_h = 8, payload sized for d_h = 4
    const LisaModel small = init_lisa_model(LisaVariant::Varying, 2, 4, 1, Modulation::QPSK, Rng(7));
    const std::string path = tmp_path("mismatch.ckpt");
    save_checkpoint(small, {}, path);
    std::string blob = read_file(path);
    const std::string needle = "\"d_h\":4";
    const auto pos = blob.find(needle);
    REQUIRE(pos != std::string::npos);
    blob.replace(pos, needle.size(), "\"d_h\":8");
    write_file(path, blob);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
    const ExperimentConfig cfg = parse_config_json(R"({
        "n_t": 2, "n_r": 3,
        "channel": {"model": "kronecker", "alpha": 0.5, "csi_error_var": 0.1},
        "constellation": "qam16",
        "snr_grid_db": [0, 5],
        "snr_range_db": [1, 7],
        "detectors": ["mmse", "sd"],
        "d_h": 32, "seed": 9
    })");
    CHECK(cfg.channel.n_t == 2);
    CHECK(cfg.channel.n_r == 3);
    CHECK(cfg.channel.model == ChannelModel::Kronecker);
    CHECK(cfg.channel.alpha == 0.5);
    CHECK(cfg.channel.csi_error_var == 0.1);
    CHECK(cfg.channel.snr_min_db == 1.0);
    CHECK(cfg.channel.snr_max_db == 7.0);
    CHECK(cfg.constellation == "qam16");
    CHECK(cfg.d_h == 32);
    CHECK(cfg.seed == 9);
    CHECK(cfg.adam.lr == 0.0006);  // default hyperparameters

    CHECK_THROWS_WITH_AS(parse_config_json(R"({"n_tt": 2})"), doctest::Contains("unknown key"),
                         std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json(R"({"min_bits": 100})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json(R"({"detectors": ["zf", "turbo"]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json(R"({"channel": {"alpha": 1.5, "model": "kronecker"}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json("not json"), std::invalid_argument);
}

TEST_CASE("sweep points meet the stopping rule and are deterministic") {
    const ExperimentConfig cfg = small_sweep_config();
    SweepOptions opt;
    const auto curves_a = run_ber_sweep(cfg, opt);
    const auto curves_b = run_ber_sweep(cfg, opt);
    CHECK(curves_to_csv(curves_a) == curves_to_csv(curves_b));

    REQUIRE(curves_a.size() == 2);
    for (const BerCurve& curve : curves_a) {
        REQUIRE(curve.points.size() == 2);
        for (const BerPoint& p : curve.points) {
            CHECK(p.bits >= cfg.min_bits);
            CHECK(p.ber == static_cast<double>(p.bit_errors) / static_cast<double>(p.bits));
            CHECK_FALSE(p.censored);  // at these SNRs errors are plentiful
        }
    }
}

TEST_CASE("sweeps are invariant to the thread count") {
    const ExperimentConfig cfg = small_sweep_config();
    SweepOptions serial;
    serial.threads = 1;
    SweepOptions parallel;
    parallel.threads = 4;
    CHECK(curves_to_csv(run_ber_sweep(cfg, serial)) ==
          curves_to_csv(run_ber_sweep(cfg, parallel)));
}

TEST_CASE("noiseless sweep reports zero ber with the censored flag") {
    ExperimentConfig cfg = small_sweep_config();
    cfg.detectors = {"zf"};
    cfg.snr_grid_db = {6.0};
    SweepOptions opt;
    opt.force_noiseless = true;
    opt.bit_cap = 20000;  // the hard cap is 1e7; shrunk here to keep the test fast
    const auto curves = run_ber_sweep(cfg, opt);
    REQUIRE(curves.size() == 1);
    const BerPoint& p = curves[0].points[0];
    CHECK(p.bit_errors == 0);
    CHECK(p.ber == 0.0);
    CHECK(p.censored);
    CHECK(p.bits >= opt.bit_cap);
}

TEST_CASE("sweep propagates an mld budget refusal") {
    ExperimentConfig cfg;
    cfg.channel.n_t = 5;
    cfg.channel.n_r = 5;
    cfg.constellation = "qam64";  // 8^10 candidates > 2^24
    cfg.detectors = {"mld"};
    cfg.snr_grid_db = {4.0};
    cfg.min_bits = 10000;
    CHECK_THROWS_WITH_AS(run_ber_sweep(cfg, SweepOptions{}), doctest::Contains("budget"),
                         std::runtime_error);
}

TEST_CASE("lisa detector requires a checkpoint") {
    ExperimentConfig cfg = small_sweep_config();
    cfg.detectors = {"lisa"};
    CHECK_THROWS_WITH_AS(run_ber_sweep(cfg, SweepOptions{}), doctest::Contains("checkpoint"),
                         std::runtime_error);
}

TEST_CASE("csv export has the fixed header and exact quotient rows") {
    const ExperimentConfig cfg = small_sweep_config();
    const auto curves = run_ber_sweep(cfg, SweepOptions{});
    const std::string text = curves_to_csv(curves);

    std::istringstream lines(text);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "detector,snr_db,bits,bit_errors,ber,seed,censored");

    const std::string path = tmp_path("curves.csv");
    export_csv(curves, path);
    const std::string file_a = read_file(path);
    CHECK(file_a == text);

    // re-export of a loaded csv is byte-identical
    const auto loaded = load_csv(path);
    export_csv(loaded, path);
    CHECK(read_file(path) == file_a);
    fs::remove(path);
}

TEST_CASE("joint evaluation shares one stream across detectors") {
    ExperimentConfig cfg = small_sweep_config();
    cfg.detectors = {"sd", "mld", "zf"};
    const auto results = joint_ber(cfg, 6.0, 10000, SweepOptions{});
    REQUIRE(results.size() == 3);
    CHECK(results[0].bits == results[1].bits);
    CHECK(results[0].bits == results[2].bits);
    CHECK(results[0].bits >= 10000);
    // sd and mld are the same detector on the same stream
    CHECK(results[0].bit_errors == results[1].bit_errors);
    // and the exhaustive search never loses to zf
    CHECK(results[1].bit_errors <= results[2].bit_errors);
}

TEST_CASE("loss trace export format") {
    const std::string path = tmp_path("trace.csv");
    export_loss_trace({{1, 1, 1.5}, {2, 1, 0.75}}, path);
    CHECK(read_file(path) == "batch,epoch,loss\n1,1,1.5\n2,1,0.75\n");
    fs::remove(path);
}

#ifdef MIMOLAB_BIN
namespace {

int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string out_file = tmp_path("cli_out.txt");
    const std::string cmd = std::string(MIMOLAB_BIN) + " " + args + " > " + out_file + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (output) *output = read_file(out_file);
    fs::remove(out_file);
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli info prints the parameter-count formula value") {
    const LisaModel m =
        init_lisa_model(LisaVariant::Varying, 4, 64, 2, Modulation::QPSK, Rng(11));
    const std::string path = tmp_path("info.ckpt");
    save_checkpoint(m, {42, 0, 0}, path);
    std::string output;
    const int rc = run_cli("info --checkpoint " + path, &output);
    CHECK(rc == 0);
    CHECK(output.find("145408") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("cli rejects invalid arguments with exit code 2") {
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
    CHECK(run_cli("sweep") == 2);  // missing required options
}

TEST_CASE("cli sweep fails cleanly on a missing checkpoint") {
    const ExperimentConfig cfg = small_sweep_config();
    const std::string cfg_path = tmp_path("cfg.json");
    write_file(cfg_path, R"({"n_t":2,"n_r":2,"detectors":["lisa"],"snr_grid_db":[4],"min_bits":10000})");
    std::string output;
    const int rc = run_cli("sweep --config " + cfg_path + " --out /dev/null", &output);
    CHECK(rc == 1);
    CHECK(output.find("checkpoint") != std::string::npos);
    fs::remove(cfg_path);
}

TEST_CASE("cli train/sweep/eval round trip on a tiny model") {
    const std::string cfg_path = tmp_path("train_cfg.json");
    write_file(cfg_path, R"({
        "n_t": 2, "n_r": 2, "constellation": "qpsk",
        "d_h": 8, "n_blocks": 2,
        "epochs": 1, "batches_per_epoch": 10, "batch_size": 16,
        "snr_range_db": [2, 8], "snr_grid_db": [4],
        "detectors": ["lisa", "zf"], "min_bits": 10000, "min_errors": 10,
        "seed": 3
    })");
    const std::string ckpt = tmp_path("tiny.ckpt");
    const std::string curves = tmp_path("tiny.csv");

    CHECK(run_cli("train --config " + cfg_path + " --out " + ckpt) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".trace.csv"));

    CHECK(run_cli("sweep --config " + cfg_path + " --checkpoint " + ckpt + " --out " + curves) ==
          0);
    const auto loaded = load_csv(curves);
    CHECK(loaded.size() == 2);

    // eval one hand-written sample
    const std::string sample = tmp_path("sample.json");
    write_file(sample, R"({
        "constellation": "qpsk",
        "h_re": [[1.0, 0.1],[0.05, 0.9]],
        "h_im": [[0.0, -0.2],[0.15, 0.0]],
        "y_re": [0.8, -0.6],
        "y_im": [0.1, 0.7],
        "noise_var": 0.05
    })");
    std::string output;
    CHECK(run_cli("eval " + sample + " --detector mld", &output) == 0);
    CHECK(output.find("s_hat") != std::string::npos);
    CHECK(run_cli("eval " + sample + " --detector nope", &output) == 1);

    for (const std::string& p :
         {cfg_path, ckpt, ckpt + ".trace.csv", curves, sample})
        fs::remove(p);
}
#endif
