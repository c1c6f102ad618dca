#pragma once

#include <cstdint>

#include "sla/mechanisms.hpp"
#include "sla/report.hpp"

namespace sla::verify {

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t instances = 100;
    std::size_t max_seq_len = 128;
    std::size_t max_heads = 8;
    std::size_t max_dim = 16;
    FeatureMapKind feature_map = FeatureMapKind::identity;
};

// Parallel, recurrent and chunkwise (C in {1, 7, 16, L}) forms of linear and
// gated linear attention agree within 1e-10 on random instances.
RunReport strategy_equivalence(const VerifyOptions& options);

// Gated mechanisms collapse onto their bases: gates forced to 1 (1e-12),
// single-head gated == linear (1e-12), gamma = 1 gated retnet == sla (1e-12),
// saturated forget gate (logits >= 20) gated gla == sla (1e-6).
RunReport reduction_laws(const VerifyOptions& options);

// For every recurrent mechanism: zeroing tokens after position t never moves
// outputs at <= t (exactly), and splitting the stream at any t and carrying
// the state reproduces the single pass within 1e-12.
RunReport causality_and_streaming(const VerifyOptions& options);

RunReport run_all(const VerifyOptions& options);

double outputs_max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b);

}  // namespace sla::verify
