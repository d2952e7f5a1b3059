#include "mimolab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mimo {

namespace {

constexpr char kMagic[4] = {'L', 'I', 'S', 'A'};

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64_le(std::string& out, double d) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const LisaModel& model, const TrainProgress& progress,
                     const std::string& path) {
    nlohmann::json meta;
    meta["variant"] = variant_label(model.variant);
    meta["n_t"] = model.n_t;
    meta["d_h"] = model.d_h;
    meta["n_blocks"] = model.n_blocks;
    meta["constellation"] = make_constellation(model.constellation).label();
    meta["seed"] = progress.seed;
    meta["epochs_trained"] = progress.epochs;
    meta["batches_trained"] = progress.batches;
    meta["param_count"] = model.param_count();
    const std::string meta_str = meta.dump();

    const RealVector flat = model.pack();

    std::string blob;
    blob.reserve(9 + meta_str.size() + 8 * flat.size());
    blob.append(kMagic, 4);
    blob.push_back(static_cast<char>(kCheckpointVersion));
    put_u32_le(blob, static_cast<std::uint32_t>(meta_str.size()));
    blob += meta_str;
    for (double d : flat) put_f64_le(blob, d);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

    if (blob.size() < 9 || std::memcmp(blob.data(), kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    if (p[4] != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(int(p[4])) + " (expected " +
                                 std::to_string(int(kCheckpointVersion)) + ")");
    const std::uint32_t meta_len = get_u32_le(p + 5);
    if (blob.size() < 9 + static_cast<std::size_t>(meta_len))
        throw std::runtime_error("load_checkpoint: truncated metadata in " + path);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(blob.substr(9, meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_checkpoint: corrupt metadata: " + std::string(e.what()));
    }

    Checkpoint ckpt;
    const LisaVariant variant = parse_variant(meta.at("variant").get<std::string>());
    const auto n_t = meta.at("n_t").get<std::size_t>();
    const auto d_h = meta.at("d_h").get<std::size_t>();
    const auto n_blocks = meta.at("n_blocks").get<std::size_t>();
    const Constellation c = make_constellation(meta.at("constellation").get<std::string>());
    ckpt.progress.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.progress.epochs = meta.at("epochs_trained").get<std::size_t>();
    ckpt.progress.batches = meta.at("batches_trained").get<std::size_t>();

    ckpt.model = init_lisa_model(variant, n_t, d_h, n_blocks, c.name, Rng(0));
    const std::size_t expect = ckpt.model.param_count();
    if (meta.at("param_count").get<std::size_t>() != expect)
        throw std::runtime_error(
            "load_checkpoint: metadata param_count does not match the declared architecture");

    const std::size_t payload_off = 9 + meta_len;
    const std::size_t payload_len = blob.size() - payload_off;
    if (payload_len != 8 * expect)
        throw std::runtime_error("load_checkpoint: payload holds " +
                                 std::to_string(payload_len / 8) + " parameters, expected " +
                                 std::to_string(expect));

    RealVector flat(expect);
    for (std::size_t i = 0; i < expect; ++i)
        flat[i] = get_f64_le(p + payload_off + 8 * i);
    ckpt.model.unpack(flat);
    return ckpt;
}

}  // namespace mimo
