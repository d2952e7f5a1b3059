// Binary checkpoint: magic "LISA", one version byte, a little-endian u32
// length-prefixed JSON metadata block, then the flat parameter payload as
// little-endian 64-bit floats in declared step order. Round trips are
// bit-exact.

#ifndef MIMOLAB_CHECKPOINT_HPP
#define MIMOLAB_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "mimolab/lisa.hpp"

namespace mimo {

struct TrainProgress {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t batches = 0;  // total batches seen
};

struct Checkpoint {
    LisaModel model;
    TrainProgress progress;
};

constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const LisaModel& model, const TrainProgress& progress,
                     const std::string& path);

/// Throws std::runtime_error on bad magic, unsupported version, corrupt
/// metadata or a payload length that does not match the metadata-implied
/// parameter count. Never returns a partial model.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mimo

#endif
