// mimolab command line: train LISA models, run BER sweeps, evaluate single
// instances and inspect checkpoints.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mimolab/checkpoint.hpp"
#include "mimolab/classic.hpp"
#include "mimolab/config.hpp"
#include "mimolab/sweep.hpp"

namespace {

using nlohmann::json;

int cmd_train(const std::string& config_path, const std::string& out_path,
              std::string trace_path, std::optional<std::uint64_t> seed, int threads) {
    mimo::ExperimentConfig cfg = mimo::load_config(config_path);
    if (seed) cfg.seed = *seed;

    mimo::TrainConfig tc = cfg.to_train_config();
    tc.threads = threads;

    std::printf("training %s LISA: n_t=%zu d_h=%zu blocks=%zu %s, %zu epochs x %zu batches x %zu\n",
                cfg.variant.c_str(), cfg.channel.n_t, cfg.d_h, cfg.n_blocks,
                cfg.constellation.c_str(), cfg.epochs, cfg.batches_per_epoch, cfg.batch_size);

    mimo::TrainResult result = mimo::train(tc);

    mimo::TrainProgress progress;
    progress.seed = cfg.seed;
    progress.epochs = cfg.epochs;
    progress.batches = result.trace.size();
    mimo::save_checkpoint(result.model, progress, out_path);

    if (trace_path.empty()) trace_path = out_path + ".trace.csv";
    mimo::export_loss_trace(result.trace, trace_path);

    if (!result.trace.empty())
        std::printf("loss: first %.6f last %.6f (%zu batches)\n", result.trace.front().loss,
                    result.trace.back().loss, result.trace.size());
    std::printf("checkpoint: %s\nloss trace: %s\n", out_path.c_str(), trace_path.c_str());

    if (!result.completed) {
        std::fprintf(stderr, "training aborted: %s\n", result.message.c_str());
        return 1;
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& ckpt_path,
              const std::string& out_path, std::optional<std::uint64_t> seed, int threads) {
    mimo::ExperimentConfig cfg = mimo::load_config(config_path);
    if (seed) cfg.seed = *seed;

    std::optional<mimo::Checkpoint> ckpt;
    mimo::SweepOptions opt;
    opt.threads = threads;
    bool wants_lisa = false;
    for (const std::string& d : cfg.detectors) wants_lisa |= d == "lisa";
    if (wants_lisa) {
        if (ckpt_path.empty())
            throw std::runtime_error("sweep: detector \"lisa\" requires --checkpoint");
        ckpt = mimo::load_checkpoint(ckpt_path);
        opt.lisa = &ckpt->model;
    }

    const std::vector<mimo::BerCurve> curves = mimo::run_ber_sweep(cfg, opt);
    mimo::export_csv(curves, out_path);

    for (const mimo::BerCurve& curve : curves)
        for (const mimo::BerPoint& p : curve.points)
            std::printf("%-6s %5.1f dB  ber %.3e  (%llu/%llu bits%s)\n", curve.detector.c_str(),
                        p.snr_db, p.ber, static_cast<unsigned long long>(p.bit_errors),
                        static_cast<unsigned long long>(p.bits), p.censored ? ", censored" : "");
    std::printf("curves: %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& sample_path, const std::string& detector,
             const std::string& ckpt_path, const std::string& out_path) {
    std::ifstream in(sample_path);
    if (!in) throw std::runtime_error("eval: cannot open " + sample_path);
    json j = json::parse(in);

    const mimo::Constellation c = mimo::make_constellation(j.at("constellation").get<std::string>());
    const auto h_re = j.at("h_re").get<std::vector<std::vector<double>>>();
    const auto h_im = j.at("h_im").get<std::vector<std::vector<double>>>();
    const auto y_re = j.at("y_re").get<std::vector<double>>();
    const auto y_im = j.at("y_im").get<std::vector<double>>();

    const std::size_t n_r = h_re.size();
    if (n_r == 0 || h_im.size() != n_r || y_re.size() != n_r || y_im.size() != n_r)
        throw std::runtime_error("eval: inconsistent sample dimensions");
    const std::size_t n_t = h_re[0].size();

    mimo::ComplexMatrix hc(n_r, n_t);
    for (std::size_t i = 0; i < n_r; ++i) {
        if (h_re[i].size() != n_t || h_im[i].size() != n_t)
            throw std::runtime_error("eval: ragged channel matrix");
        for (std::size_t k = 0; k < n_t; ++k) hc(i, k) = {h_re[i][k], h_im[i][k]};
    }
    mimo::ComplexVector yc(n_r);
    for (std::size_t i = 0; i < n_r; ++i) yc[i] = {y_re[i], y_im[i]};

    mimo::ChannelSample smp;
    smp.H = mimo::complex_to_real_matrix(hc);
    smp.H_hat = smp.H;
    smp.y = mimo::complex_to_real_vector(yc);
    smp.noise_var = j.value("noise_var", 0.0);
    smp.ql = mimo::ql_decompose(smp.H_hat);
    if (smp.ql.rank_deficient) throw std::runtime_error("eval: channel is rank deficient");
    smp.y_tilde = mimo::rotate_observation(smp.ql.Q, smp.y);

    std::optional<mimo::Checkpoint> ckpt;
    mimo::RealVector s_hat;
    if (detector == "lisa") {
        if (ckpt_path.empty()) throw std::runtime_error("eval: detector \"lisa\" requires --checkpoint");
        ckpt = mimo::load_checkpoint(ckpt_path);
        s_hat = mimo::lisa_detect(ckpt->model, smp);
    } else if (detector == "zf") {
        s_hat = mimo::zf_detect(smp.H_hat, smp.y, c);
    } else if (detector == "mmse") {
        s_hat = mimo::mmse_detect(smp.H_hat, smp.y, c, smp.noise_var);
    } else if (detector == "zfdf") {
        s_hat = mimo::zfdf_detect(smp.ql, smp.y_tilde, c);
    } else if (detector == "sd") {
        s_hat = mimo::sphere_detect(smp.ql, smp.y_tilde, c);
    } else if (detector == "mld") {
        s_hat = mimo::mld_detect(smp.H_hat, smp.y, c);
    } else {
        throw std::runtime_error("eval: unknown detector \"" + detector + "\"");
    }

    const mimo::BitBlock bits = mimo::real_symbols_to_bits(c, s_hat);
    json out;
    out["detector"] = detector;
    out["s_hat"] = s_hat;
    out["residual"] = mimo::residual_metric(smp.y, smp.H_hat, s_hat);
    out["bits"] = bits;

    if (out_path.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("eval: cannot open " + out_path);
        os << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_info(const std::string& ckpt_path) {
    const mimo::Checkpoint ckpt = mimo::load_checkpoint(ckpt_path);
    const mimo::LisaModel& m = ckpt.model;
    std::printf("variant:        %s\n", mimo::variant_label(m.variant).c_str());
    std::printf("n_t:            %zu\n", m.n_t);
    std::printf("d_h:            %zu\n", m.d_h);
    std::printf("n_blocks:       %zu\n", m.n_blocks);
    std::printf("constellation:  %s (M=%zu)\n",
                mimo::make_constellation(m.constellation).label().c_str(), m.M());
    std::printf("seed:           %llu\n", static_cast<unsigned long long>(ckpt.progress.seed));
    std::printf("trained:        %zu epochs, %zu batches\n", ckpt.progress.epochs,
                ckpt.progress.batches);
    std::printf("parameters:     %zu\n", m.param_count());
    if (m.variant == mimo::LisaVariant::Varying)
        std::printf("count formula:  4*%zu*%zu*(2*%zu + 2*%zu + 5) + 2*%zu*%zu*%zu = %zu\n",
                    m.n_t, m.d_h, m.n_t, m.d_h, m.n_t, m.d_h, m.M(),
                    mimo::lisa_varying_param_count(m.n_t, m.d_h, m.M()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mimolab: MIMO detection laboratory"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_path, trace_path, sample_path;
    std::string detector = "zfdf";
    std::optional<std::uint64_t> seed;
    int threads = 1;

    CLI::App* train = app.add_subcommand("train", "train a LISA model from a config file");
    train->add_option("--config", config_path, "experiment config (JSON)")->required();
    train->add_option("--out", out_path, "checkpoint output path")->required();
    train->add_option("--trace", trace_path, "loss trace CSV path (default <out>.trace.csv)");
    train->add_option("--seed", seed, "override the config seed");
    train->add_option("--threads", threads, "worker threads (0 = hardware)");

    CLI::App* sweep = app.add_subcommand("sweep", "run a BER sweep and write a CSV");
    sweep->add_option("--config", config_path, "experiment config (JSON)")->required();
    sweep->add_option("--checkpoint", ckpt_path, "LISA checkpoint (needed for detector lisa)");
    sweep->add_option("--out", out_path, "curves CSV output path")->required();
    sweep->add_option("--seed", seed, "override the config seed");
    sweep->add_option("--threads", threads, "worker threads (0 = hardware)");

    CLI::App* eval = app.add_subcommand("eval", "detect one sample file (JSON)");
    eval->add_option("sample", sample_path, "sample JSON file")->required();
    eval->add_option("--detector", detector, "zf|mmse|zfdf|sd|mld|lisa");
    eval->add_option("--checkpoint", ckpt_path, "LISA checkpoint");
    eval->add_option("--out", out_path, "write the result JSON here instead of stdout");

    CLI::App* info = app.add_subcommand("info", "print checkpoint metadata");
    info->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(train)) return cmd_train(config_path, out_path, trace_path, seed, threads);
        if (app.got_subcommand(sweep)) return cmd_sweep(config_path, ckpt_path, out_path, seed, threads);
        if (app.got_subcommand(eval)) return cmd_eval(sample_path, detector, ckpt_path, out_path);
        if (app.got_subcommand(info)) return cmd_info(ckpt_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
