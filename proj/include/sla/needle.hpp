#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sla/mechanisms.hpp"

namespace sla::needle {

// Synthetic key-value retrieval: one needle pair buried under distractors,
// with the final query pointed at the needle key. Gate score overrides route
// the needle write (and the final read) to head 0 and spread distractor
// writes over the remaining heads.
struct NeedleOptions {
    double noise_scale = 0.05;        // query = normalize(needle_key + noise)
    double logit_gap = 10.0;          // routing score margin; >= ~750 underflows to one-hot
    double min_distractor_sim = 0.05; // distractor/query cosine bounds
    double max_distractor_sim = 0.5;
};

struct NeedleInstance {
    AttentionConfig config;  // dims and feature map; mechanism is chosen at scoring time
    SequenceBatch batch;     // identical content in every head
    std::size_t needle_pos = 0;
    std::vector<double> needle_value;      // unit vector, length value_dim
    Matrix scores_q;                       // seq_len x heads routing logits
    Matrix scores_k;
    std::vector<std::size_t> write_head;   // head each position's write is routed to
    double needle_similarity = 0.0;        // needle-key / final-query cosine
};

// Throws std::invalid_argument when seq_len < 2, dims are zero, or the
// options cannot keep every distractor similarity below the needle's.
NeedleInstance build_needle_instance(std::size_t seq_len, std::size_t heads,
                                     std::size_t key_dim, std::size_t value_dim, Rng& rng,
                                     const NeedleOptions& options = {});

// Cosine between the summed head outputs at the final position and the needle
// value. A zero-norm output is reported as value 0 with the degenerate flag.
struct RetrievalScore {
    double value = 0.0;
    bool degenerate = false;
};
RetrievalScore retrieval_score(const NeedleInstance& instance, MechanismKind mechanism);

// Reference score for the one-hot-gate limit: linear attention computed over
// the needle token alone, ignoring every distractor.
double needle_only_linear_score(const NeedleInstance& instance);

struct CompareRow {
    std::size_t seq_len = 0;
    double mean_linear = 0.0;
    double mean_sla = 0.0;
    double mean_full = 0.0;
    double win_rate = 0.0;  // fraction of instances with sla >= linear
};

struct CompareReport {
    std::vector<CompareRow> rows;
    // columns: L,mean_linear,mean_sla,mean_full,win_rate
    void write_csv(std::ostream& os) const;
};

CompareReport compare_mechanisms(const std::vector<std::uint64_t>& seeds,
                                 const std::vector<std::size_t>& seq_lens, std::size_t heads,
                                 std::size_t key_dim, std::size_t value_dim,
                                 const NeedleOptions& options = {});

}  // namespace sla::needle
