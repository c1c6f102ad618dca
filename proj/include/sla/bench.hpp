#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "sla/mechanisms.hpp"

namespace sla::bench {

struct BenchPair {
    MechanismKind mechanism = MechanismKind::sla;
    Strategy strategy = Strategy::recurrent;
};

struct BenchSpec {
    std::vector<BenchPair> pairs;
    std::vector<std::size_t> seq_lens;
    std::size_t reps = 5;     // timed repetitions per point (median is reported)
    std::size_t warmups = 2;  // untimed runs before measuring
    std::size_t heads = 2;
    std::size_t key_dim = 8;
    std::size_t value_dim = 8;
    std::size_t chunk_size = 64;
    FeatureMapKind feature_map = FeatureMapKind::identity;
    std::uint64_t seed = 0;
    bool threaded = false;  // run each pair on its own thread, timed on that thread
};

struct BenchPoint {
    MechanismKind mechanism = MechanismKind::sla;
    Strategy strategy = Strategy::recurrent;
    std::size_t seq_len = 0;
    double median_seconds = 0.0;
    std::size_t state_bytes = 0;
    std::size_t reps = 0;
    bool low_confidence = false;  // set when the per-call time is near timer resolution
    double output_checksum = 0.0; // sum of output entries from the timed kernel
};

// Sequence-length-dependent carrier memory: the materialized causal map for
// the parallel strategy, the recurrent state for recurrent and chunkwise.
std::size_t state_bytes_for(Strategy strategy, std::size_t seq_len, std::size_t heads,
                            std::size_t key_dim, std::size_t value_dim);

// Times run_mechanism (the same code paths the verification suites exercise)
// on random batches, one point per (pair, seq_len). Calls shorter than the
// timer can resolve are widened by batching many calls per measurement.
std::vector<BenchPoint> time_mechanism(const BenchSpec& spec);

// Least-squares slope of ln(median_seconds) against ln(seq_len). Requires
// points from a single pair, at least 4 of them, spanning a 16x range.
double fit_scaling_exponent(const std::vector<BenchPoint>& points);

// columns: mechanism,strategy,L,median_seconds,state_bytes
void write_csv(std::ostream& os, const std::vector<BenchPoint>& points);

// Per-pair fitted exponents plus the raw points.
nlohmann::json summary_json(const std::vector<BenchPoint>& points);

}  // namespace sla::bench
