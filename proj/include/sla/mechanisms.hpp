#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sla/feature_map.hpp"
#include "sla/matrix.hpp"
#include "sla/rng.hpp"

namespace sla {

// Attention mechanisms. The softmax-* kinds add per-token head-competition
// gates on the read (query) and write (key) paths of their base recurrence;
// every gated kind with gates held at 1 collapses to its base kind.
enum class MechanismKind {
    full_softmax,
    linear,
    sla,
    retnet,
    softmax_retnet,
    gla,
    softmax_gla,
    gdn,
    softmax_gdn,
};

std::string to_string(MechanismKind kind);
MechanismKind mechanism_from_string(std::string_view name);

bool is_gated(MechanismKind kind);
MechanismKind base_of(MechanismKind kind);
// silu for the delta-rule kinds, identity otherwise.
FeatureMapKind default_feature_map(MechanismKind kind);

enum class Strategy { auto_pick, parallel, recurrent, chunkwise };
std::string to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

struct AttentionConfig {
    std::size_t seq_len = 8;
    std::size_t heads = 1;
    std::size_t key_dim = 4;
    std::size_t value_dim = 4;
    FeatureMapKind feature_map = FeatureMapKind::identity;
    std::size_t chunk_size = 8;
    MechanismKind mechanism = MechanismKind::sla;

    std::size_t model_dim() const { return heads * key_dim; }
    // Throws std::invalid_argument on zero dims or zero chunk size.
    void validate() const;
};

// Per-head input projections plus the raw token stream. Heads index the outer
// vector; q/k are seq_len x key_dim, v is seq_len x value_dim, x is
// seq_len x model_dim and feeds the data-dependent gla/gdn gate sources.
struct SequenceBatch {
    std::vector<Matrix> q;
    std::vector<Matrix> k;
    std::vector<Matrix> v;
    Matrix x;

    static SequenceBatch random(const AttentionConfig& config, Rng& rng);
    SequenceBatch slice_rows(std::size_t begin, std::size_t end) const;
    std::size_t seq_len() const { return q.empty() ? 0 : q[0].rows(); }
    void validate(const AttentionConfig& config) const;
};

// Learned gate parameters and the per-mechanism recurrence parameters.
// force_alpha / force_beta / unit_gates pin the corresponding data-dependent
// quantities to constants, which the reduction and diagnostic suites use.
struct GateWeights {
    Matrix w_gq;          // key_dim x heads, read-gate scores
    Matrix w_gk;          // key_dim x heads, write-gate scores
    std::vector<double> gamma;  // per-head retnet decay, each in (0, 1]
    Matrix alpha_source;  // model_dim x key_dim, gla forget gates (col 0 doubles as gdn decay)
    Matrix beta_source;   // model_dim x 1, gdn write strength
    std::optional<double> force_alpha;  // pin alpha to a constant in (0, 1]
    std::optional<double> force_beta;   // pin beta to a constant in (0, 1]
    bool unit_gates = false;            // run gated mechanisms with gates == 1

    static GateWeights random(const AttentionConfig& config, Rng& rng);
    static std::vector<double> default_gamma(std::size_t heads);
    void validate(const AttentionConfig& config) const;
};

// Streaming recurrent state for one head: s is key_dim x value_dim, t counts
// consumed tokens. s stays finite after every update for finite inputs.
struct HeadState {
    Matrix s;
    std::size_t t = 0;

    static HeadState zero(std::size_t key_dim, std::size_t value_dim) {
        return {Matrix::zeros(key_dim, value_dim), 0};
    }
};
using HeadStates = std::vector<HeadState>;

struct RecurrentResult {
    std::vector<Matrix> outputs;  // per head, seq_len x value_dim
    HeadStates states;            // final state per head
};

// Head-competition gates: row t of the result is softmax over heads of the
// scores s_{t,h} = <proj_h[t, :], w_g[:, h]>. per_head_proj has one
// seq_len x key_dim matrix per head and w_g is key_dim x heads.
Matrix head_gates(const std::vector<Matrix>& per_head_proj, const Matrix& w_g);

Matrix unit_gate_matrix(std::size_t seq_len, std::size_t heads);

// --- parallel-form kernels (materialize the causal seq_len x seq_len map) ---

// Softmax attention with 1/sqrt(key_dim) scaling, causal.
std::vector<Matrix> full_attention(const SequenceBatch& batch, const AttentionConfig& config);

// Unnormalized linear attention: y_t = phi(q_t) sum_{j<=t} phi(k_j)^T v_j.
std::vector<Matrix> linear_parallel(const SequenceBatch& batch, const AttentionConfig& config);

// Gated linear attention in parallel form. Gate matrices are seq_len x heads;
// each row must sum to 1 within 1e-9 or be identically 1 (the ungated
// embedding). Violations raise std::domain_error.
std::vector<Matrix> sla_parallel(const SequenceBatch& batch, const Matrix& gates_q,
                                 const Matrix& gates_k, const AttentionConfig& config);

// --- recurrent-form kernels (O(1) state in the sequence length) ---

RecurrentResult linear_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                                 HeadStates initial = {});

RecurrentResult sla_recurrent(const SequenceBatch& batch, const Matrix& gates_q,
                              const Matrix& gates_k, const AttentionConfig& config,
                              HeadStates initial = {});

// RetNet recurrence s_t = gamma_h s_{t-1} + write_t, optionally gated.
// Null gate pointers mean gates == 1. gamma entries outside (0, 1] raise
// std::invalid_argument.
RecurrentResult retnet_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                                 const std::vector<double>& gamma,
                                 const Matrix* gates_q = nullptr, const Matrix* gates_k = nullptr,
                                 HeadStates initial = {});

// Gated linear attention with a data-dependent diagonal forget gate
// alpha_t = sigmoid(x_t alpha_source) in (0,1)^key_dim, shared across heads
// and broadcast over the value dimension. A saturated sigmoid (exactly 0 or
// 1) raises std::logic_error; weights.force_alpha bypasses the source.
RecurrentResult gla_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                              const GateWeights& weights, const Matrix* gates_q = nullptr,
                              const Matrix* gates_k = nullptr, HeadStates initial = {});

// Delta-rule recurrence with write strength beta_t = sigmoid(x_t beta_source)
// and scalar decay alpha_t = sigmoid(x_t alpha_source[:, 0]): the decayed
// state is corrected toward v_t along the L2-normalized phi(k_t) direction,
//   s_pre = alpha_t s_{t-1}
//   v'    = beta_t (gate_k v_t - kappa_t s_pre),   kappa_t = phi(k_t)/|phi(k_t)|
//   s_t   = s_pre + kappa_t^T v'
// which for unit gates equals s_t = alpha_t (I - beta_t kappa^T kappa) s_{t-1}
//                                   + beta_t kappa^T (v_t) exactly.
// Saturated sigmoids raise std::logic_error; force_alpha/force_beta bypass.
RecurrentResult gdn_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                              const GateWeights& weights, const Matrix* gates_q = nullptr,
                              const Matrix* gates_k = nullptr, HeadStates initial = {});

// --- chunkwise kernels (intra-chunk parallel, inter-chunk recurrent) ---

std::vector<Matrix> sla_chunkwise(const SequenceBatch& batch, const Matrix& gates_q,
                                  const Matrix& gates_k, const AttentionConfig& config);

std::vector<Matrix> linear_chunkwise(const SequenceBatch& batch, const AttentionConfig& config);

// --- dispatch ---

struct MechanismRun {
    std::vector<Matrix> outputs;  // per head, seq_len x value_dim
    HeadStates states;            // populated for the recurrent strategy
    Matrix gates_q;               // gates actually used (unit for ungated kinds)
    Matrix gates_k;
};

// Computes gates from weights (or unit gates when the mechanism is ungated or
// weights.unit_gates is set) and dispatches to the requested strategy.
// auto_pick resolves to parallel for full_softmax and recurrent otherwise.
// Unsupported mechanism/strategy combinations raise std::invalid_argument.
MechanismRun run_mechanism(const SequenceBatch& batch, const AttentionConfig& config,
                           const GateWeights& weights, Strategy strategy = Strategy::auto_pick);

// Extra parameters the head gates add to a stack of `layers` attention layers:
// one key_dim x heads matrix per path (read, write) per layer.
std::size_t count_gate_params(std::size_t layers, std::size_t key_dim, std::size_t heads);

}  // namespace sla
