#pragma once

#include <cstdint>
#include <string>

#include "auxdiff/common.hpp"

namespace auxdiff {

/// Provenance carried with every matrix of samples.
struct BatchMeta {
    std::string source;  // "dataset" or "generated"
    std::string variant;
    std::string config_hash;
    std::uint64_t seed = 0;
    int steps = 0;
    int requested = 0;
    int divergence_count = 0;
};

/// N points in R^n (rows) plus provenance. Rows are always finite;
/// diverged reverse chains are counted in meta, never emitted.
struct SampleBatch {
    Matd data;
    BatchMeta meta;
};

}  // namespace auxdiff
