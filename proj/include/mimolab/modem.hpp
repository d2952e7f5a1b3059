// Constellations over the real alphabet, Gray bit mapping, hard slicing and
// bit-error accounting. Levels are normalized to unit average complex-symbol
// energy, i.e. mean(a^2 over A) = 1/2 per real component.

#ifndef MIMOLAB_MODEM_HPP
#define MIMOLAB_MODEM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mimolab/linalg.hpp"

namespace mimo {

enum class Modulation { QPSK, QAM16, QAM64 };

using BitBlock = std::vector<std::uint8_t>;

struct Constellation {
    Modulation name;
    RealVector alphabet;          // sorted ascending, symmetric about 0
    std::size_t M;                // |alphabet|
    std::size_t bits_per_symbol;  // log2(M), per real symbol
    double energy_scale;          // distance between adjacent unscaled levels is 2*this

    double symbol_variance() const;  // mean(a^2 over alphabet)
    std::string label() const;
};

Constellation make_constellation(Modulation name);
Constellation make_constellation(const std::string& name);  // "qpsk"|"qam16"|"qam64"

/// Gray label of the alphabet level at `index`.
std::uint32_t gray_label(std::uint32_t index);

/// Index of the alphabet level closest to v; ties go to the smaller level.
std::size_t slice_index(const Constellation& c, double v);

RealVector bits_to_real_symbols(const Constellation& c, const BitBlock& bits);
BitBlock real_symbols_to_bits(const Constellation& c, const RealVector& symbols);

/// Each component replaced by the nearest alphabet level.
RealVector slice_to_alphabet(const Constellation& c, const RealVector& v);

struct BitErrorCount {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
};

/// Hamming distance between the Gray bit images of the two symbol vectors.
/// s_hat is sliced to the alphabet first.
BitErrorCount bit_error_rate(const Constellation& c, const RealVector& s_true,
                             const RealVector& s_hat);

}  // namespace mimo

#endif
