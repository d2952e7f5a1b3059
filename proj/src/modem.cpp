#include "mimolab/modem.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace mimo {

double Constellation::symbol_variance() const {
    double acc = 0.0;
    for (double a : alphabet) acc += a * a;
    return acc / static_cast<double>(M);
}

std::string Constellation::label() const {
    switch (name) {
        case Modulation::QPSK: return "qpsk";
        case Modulation::QAM16: return "qam16";
        case Modulation::QAM64: return "qam64";
    }
    return "?";
}

Constellation make_constellation(Modulation name) {
    std::size_t m = 0;
    switch (name) {
        case Modulation::QPSK: m = 2; break;
        case Modulation::QAM16: m = 4; break;
        case Modulation::QAM64: m = 8; break;
    }
    // Odd integer levels +-1, +-3, ... scaled so that the average energy of a
    // complex symbol (two independent real components) is exactly 1.
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double level = 2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(m);
        mean_sq += level * level;
    }
    mean_sq /= static_cast<double>(m);
    const double scale = 1.0 / std::sqrt(2.0 * mean_sq);

    Constellation c;
    c.name = name;
    c.M = m;
    c.bits_per_symbol = static_cast<std::size_t>(std::bit_width(m) - 1);
    c.energy_scale = scale;
    c.alphabet.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        c.alphabet[i] = (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(m)) * scale;
    return c;
}

Constellation make_constellation(const std::string& name) {
    if (name == "qpsk") return make_constellation(Modulation::QPSK);
    if (name == "qam16") return make_constellation(Modulation::QAM16);
    if (name == "qam64") return make_constellation(Modulation::QAM64);
    throw std::invalid_argument("unknown constellation: " + name);
}

std::uint32_t gray_label(std::uint32_t index) { return index ^ (index >> 1); }

namespace {

std::uint32_t gray_decode(std::uint32_t g) {
    std::uint32_t i = g;
    while (g >>= 1) i ^= g;
    return i;
}

}  // namespace

std::size_t slice_index(const Constellation& c, double v) {
    std::size_t best = 0;
    double best_d = std::fabs(v - c.alphabet[0]);
    for (std::size_t i = 1; i < c.M; ++i) {
        const double d = std::fabs(v - c.alphabet[i]);
        if (d < best_d) {  // strict: ties keep the smaller level
            best_d = d;
            best = i;
        }
    }
    return best;
}

RealVector bits_to_real_symbols(const Constellation& c, const BitBlock& bits) {
    if (bits.size() % c.bits_per_symbol != 0)
        throw std::invalid_argument("bits_to_real_symbols: length not divisible by bits per symbol");
    RealVector out(bits.size() / c.bits_per_symbol);
    for (std::size_t s = 0; s < out.size(); ++s) {
        std::uint32_t g = 0;
        for (std::size_t b = 0; b < c.bits_per_symbol; ++b)
            g = (g << 1) | (bits[s * c.bits_per_symbol + b] & 1u);
        out[s] = c.alphabet[gray_decode(g)];
    }
    return out;
}

BitBlock real_symbols_to_bits(const Constellation& c, const RealVector& symbols) {
    BitBlock bits(symbols.size() * c.bits_per_symbol);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        const std::uint32_t g = gray_label(static_cast<std::uint32_t>(slice_index(c, symbols[s])));
        for (std::size_t b = 0; b < c.bits_per_symbol; ++b)
            bits[s * c.bits_per_symbol + b] =
                static_cast<std::uint8_t>((g >> (c.bits_per_symbol - 1 - b)) & 1u);
    }
    return bits;
}

RealVector slice_to_alphabet(const Constellation& c, const RealVector& v) {
    RealVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c.alphabet[slice_index(c, v[i])];
    return out;
}

BitErrorCount bit_error_rate(const Constellation& c, const RealVector& s_true,
                             const RealVector& s_hat) {
    if (s_true.size() != s_hat.size())
        throw std::invalid_argument("bit_error_rate: dimension mismatch");
    BitErrorCount count;
    count.bits = s_true.size() * c.bits_per_symbol;
    for (std::size_t i = 0; i < s_true.size(); ++i) {
        const std::uint32_t gt = gray_label(static_cast<std::uint32_t>(slice_index(c, s_true[i])));
        const std::uint32_t gh = gray_label(static_cast<std::uint32_t>(slice_index(c, s_hat[i])));
        count.errors += std::popcount(gt ^ gh);
    }
    return count;
}

}  // namespace mimo
