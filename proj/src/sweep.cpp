#include "mimolab/sweep.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mimolab/classic.hpp"
#include "mimolab/parallel.hpp"

namespace mimo {

namespace {

RealVector detect_with(const std::string& name, const ChannelSample& smp,
                       const Constellation& c, const LisaModel* lisa) {
    if (name == "zf")
        return slice_to_alphabet(c, least_squares_estimate(smp.ql, smp.y_tilde));
    if (name == "mmse") return mmse_detect(smp.H_hat, smp.y, c, smp.noise_var);
    if (name == "zfdf") return zfdf_detect(smp.ql, smp.y_tilde, c);
    if (name == "sd") return sphere_detect(smp.ql, smp.y_tilde, c);
    if (name == "mld") return mld_detect(smp.H_hat, smp.y, c);
    if (name == "lisa") {
        if (!lisa)
            throw std::runtime_error("detector \"lisa\" requires a loaded checkpoint");
        return lisa_detect(*lisa, smp);
    }
    throw std::runtime_error("unknown detector \"" + name + "\"");
}

ChannelConfig point_channel_config(const ExperimentConfig& cfg, double snr_db,
                                   bool force_noiseless) {
    ChannelConfig ch = cfg.channel;
    ch.snr_min_db = snr_db;
    ch.snr_max_db = snr_db;
    ch.force_noiseless = force_noiseless;
    return ch;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<BerCurve> run_ber_sweep(const ExperimentConfig& cfg, const SweepOptions& opt) {
    cfg.validate();
    const Constellation c = make_constellation(cfg.constellation);
    if (opt.lisa) {
        if (make_constellation(opt.lisa->constellation).name != c.name)
            throw std::runtime_error("sweep: checkpoint constellation does not match config");
    }

    struct Point {
        std::size_t det_idx;
        double snr_db;
        BerPoint result;
    };
    std::vector<Point> points;
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d)
        for (double snr : cfg.snr_grid_db) points.push_back({d, snr, {}});

    Rng master(cfg.seed);
    std::vector<std::exception_ptr> errors(points.size());

    run_chunks(points.size(), opt.threads, [&](std::size_t pi) {
        try {
            Point& pt = points[pi];
            const std::string& det = cfg.detectors[pt.det_idx];
            Rng rng = master.fork(pi);
            const ChannelGenerator gen(point_channel_config(cfg, pt.snr_db, opt.force_noiseless),
                                       c);
            std::uint64_t bits = 0, errs = 0;
            while ((bits < cfg.min_bits || errs < cfg.min_errors) && bits < opt.bit_cap) {
                const ChannelSample smp = gen.generate(rng);
                const RealVector s_hat = detect_with(det, smp, c, opt.lisa);
                const BitErrorCount bc = bit_error_rate(c, smp.s, s_hat);
                bits += bc.bits;
                errs += bc.errors;
            }
            pt.result.snr_db = pt.snr_db;
            pt.result.bits = bits;
            pt.result.bit_errors = errs;
            pt.result.ber = static_cast<double>(errs) / static_cast<double>(bits);
            pt.result.seed = rng.seed();
            pt.result.censored = errs < cfg.min_errors;
        } catch (...) {
            errors[pi] = std::current_exception();
        }
    });

    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<BerCurve> curves(cfg.detectors.size());
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) curves[d].detector = cfg.detectors[d];
    for (const Point& pt : points) curves[pt.det_idx].points.push_back(pt.result);
    return curves;
}

std::vector<JointBer> joint_ber(const ExperimentConfig& cfg, double snr_db,
                                std::uint64_t min_bits, const SweepOptions& opt) {
    const Constellation c = make_constellation(cfg.constellation);
    const std::uint64_t bits_per_sample = 2 * cfg.channel.n_t * c.bits_per_symbol;
    const std::uint64_t n_samples = (min_bits + bits_per_sample - 1) / bits_per_sample;

    constexpr std::size_t kChunks = 8;
    struct Counts {
        std::vector<std::uint64_t> bits, errs;
    };
    std::vector<Counts> chunk_counts(kChunks);

    Rng master(cfg.seed);
    const Rng point_rng = master.fork(std::bit_cast<std::uint64_t>(snr_db));
    std::vector<std::exception_ptr> errors(kChunks);

    run_chunks(kChunks, opt.threads, [&](std::size_t ci) {
        try {
            Counts& cc = chunk_counts[ci];
            cc.bits.assign(cfg.detectors.size(), 0);
            cc.errs.assign(cfg.detectors.size(), 0);
            const std::uint64_t lo = ci * n_samples / kChunks;
            const std::uint64_t hi = (ci + 1) * n_samples / kChunks;
            if (lo == hi) return;
            Rng rng = point_rng.fork(ci);
            const ChannelGenerator gen(point_channel_config(cfg, snr_db, opt.force_noiseless), c);
            for (std::uint64_t s = lo; s < hi; ++s) {
                const ChannelSample smp = gen.generate(rng);
                for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
                    const RealVector s_hat = detect_with(cfg.detectors[d], smp, c, opt.lisa);
                    const BitErrorCount bc = bit_error_rate(c, smp.s, s_hat);
                    cc.bits[d] += bc.bits;
                    cc.errs[d] += bc.errors;
                }
            }
        } catch (...) {
            errors[ci] = std::current_exception();
        }
    });

    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<JointBer> out(cfg.detectors.size());
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
        out[d].detector = cfg.detectors[d];
        for (const Counts& cc : chunk_counts) {
            out[d].bits += cc.bits[d];
            out[d].bit_errors += cc.errs[d];
        }
        out[d].ber = static_cast<double>(out[d].bit_errors) / static_cast<double>(out[d].bits);
    }
    return out;
}

std::string curves_to_csv(const std::vector<BerCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("export_csv: no curves");
    std::string out = "detector,snr_db,bits,bit_errors,ber,seed,censored\n";
    for (const BerCurve& curve : curves) {
        for (const BerPoint& p : curve.points) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s,%s,%" PRIu64 ",%" PRIu64 ",%s,%" PRIu64 ",%d\n",
                          curve.detector.c_str(), format_double(p.snr_db).c_str(), p.bits,
                          p.bit_errors, format_double(p.ber).c_str(), p.seed,
                          p.censored ? 1 : 0);
            out += buf;
        }
    }
    return out;
}

void export_csv(const std::vector<BerCurve>& curves, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_csv: cannot open " + path);
    const std::string text = curves_to_csv(curves);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("export_csv: write failed for " + path);
}

std::vector<BerCurve> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "detector,snr_db,bits,bit_errors,ber,seed,censored")
        throw std::runtime_error("parse_csv: unexpected header");

    std::vector<BerCurve> curves;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 7) throw std::runtime_error("parse_csv: malformed row: " + line);

        BerPoint p;
        p.snr_db = std::stod(fields[1]);
        p.bits = std::stoull(fields[2]);
        p.bit_errors = std::stoull(fields[3]);
        p.ber = std::stod(fields[4]);
        p.seed = std::stoull(fields[5]);
        p.censored = fields[6] == "1";

        if (curves.empty() || curves.back().detector != fields[0])
            curves.push_back({fields[0], {}});
        curves.back().points.push_back(p);
    }
    return curves;
}

std::vector<BerCurve> load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_csv(text);
}

void export_loss_trace(const std::vector<LossPoint>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_loss_trace: cannot open " + path);
    out << "batch,epoch,loss\n";
    for (const LossPoint& p : trace)
        out << p.batch << "," << p.epoch << "," << format_double(p.loss) << "\n";
    if (!out) throw std::runtime_error("export_loss_trace: write failed for " + path);
}

}  // namespace mimo
