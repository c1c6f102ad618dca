#include "sla/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>

namespace sla {

namespace {

constexpr double kGateRowTol = 1e-9;

void check_head_states(const AttentionConfig& config, HeadStates& states) {
    if (states.empty()) {
        states.reserve(config.heads);
        for (std::size_t h = 0; h < config.heads; ++h)
            states.push_back(HeadState::zero(config.key_dim, config.value_dim));
        return;
    }
    if (states.size() != config.heads)
        throw std::invalid_argument("initial states: wrong head count");
    for (const auto& st : states) {
        if (st.s.rows() != config.key_dim || st.s.cols() != config.value_dim)
            throw std::invalid_argument("initial states: wrong state shape");
        if (!st.s.is_finite()) throw std::domain_error("initial states: non-finite state");
    }
}

// Gate matrices are either row-normalized head distributions or identically 1
// (the ungated embedding of the base mechanisms).
void check_gate_matrix(const Matrix& g, std::size_t seq_len, std::size_t heads,
                       const char* which) {
    if (g.rows() != seq_len || g.cols() != heads)
        throw std::invalid_argument(std::string(which) + ": gate matrix has wrong shape");
    if (!g.is_finite()) throw std::domain_error(std::string(which) + ": non-finite gates");
    bool all_unit = true;
    for (double v : g.data())
        if (v != 1.0) {
            all_unit = false;
            break;
        }
    if (all_unit) return;
    for (std::size_t t = 0; t < seq_len; ++t) {
        double sum = 0.0;
        for (std::size_t h = 0; h < heads; ++h) sum += g(t, h);
        if (std::abs(sum - 1.0) > kGateRowTol)
            throw std::domain_error(std::string(which) + ": gate rows must sum to 1");
    }
}

// phi rows scaled by the head's gate column: row t of the result is
// g(t, h) * phi(m[t, :]).
Matrix gated_features(const Matrix& m, const Matrix& gates, std::size_t h, FeatureMapKind fmap) {
    Matrix out = feature_map(m, fmap);
    for (std::size_t t = 0; t < out.rows(); ++t) {
        const double g = gates(t, h);
        for (std::size_t c = 0; c < out.cols(); ++c) out(t, c) *= g;
    }
    return out;
}

double source_sigmoid(std::span<const double> x_row, const Matrix& source, std::size_t col,
                      const char* which) {
    double z = 0.0;
    for (std::size_t i = 0; i < x_row.size(); ++i) z += x_row[i] * source(i, col);
    const double s = sigmoid(z);
    if (s <= 0.0 || s >= 1.0)
        throw std::logic_error(std::string(which) + ": gate source saturated out of (0, 1)");
    return s;
}

}  // namespace

std::string to_string(MechanismKind kind) {
    switch (kind) {
        case MechanismKind::full_softmax: return "full-softmax";
        case MechanismKind::linear: return "linear";
        case MechanismKind::sla: return "sla";
        case MechanismKind::retnet: return "retnet";
        case MechanismKind::softmax_retnet: return "softmax-retnet";
        case MechanismKind::gla: return "gla";
        case MechanismKind::softmax_gla: return "softmax-gla";
        case MechanismKind::gdn: return "gdn";
        case MechanismKind::softmax_gdn: return "softmax-gdn";
    }
    throw std::logic_error("to_string: unknown mechanism");
}

MechanismKind mechanism_from_string(std::string_view name) {
    if (name == "full-softmax") return MechanismKind::full_softmax;
    if (name == "linear") return MechanismKind::linear;
    if (name == "sla") return MechanismKind::sla;
    if (name == "retnet") return MechanismKind::retnet;
    if (name == "softmax-retnet") return MechanismKind::softmax_retnet;
    if (name == "gla") return MechanismKind::gla;
    if (name == "softmax-gla") return MechanismKind::softmax_gla;
    if (name == "gdn") return MechanismKind::gdn;
    if (name == "softmax-gdn") return MechanismKind::softmax_gdn;
    throw std::invalid_argument("unknown mechanism: " + std::string(name));
}

bool is_gated(MechanismKind kind) {
    switch (kind) {
        case MechanismKind::sla:
        case MechanismKind::softmax_retnet:
        case MechanismKind::softmax_gla:
        case MechanismKind::softmax_gdn: return true;
        default: return false;
    }
}

MechanismKind base_of(MechanismKind kind) {
    switch (kind) {
        case MechanismKind::sla: return MechanismKind::linear;
        case MechanismKind::softmax_retnet: return MechanismKind::retnet;
        case MechanismKind::softmax_gla: return MechanismKind::gla;
        case MechanismKind::softmax_gdn: return MechanismKind::gdn;
        default: return kind;
    }
}

FeatureMapKind default_feature_map(MechanismKind kind) {
    const MechanismKind base = base_of(kind);
    if (base == MechanismKind::gdn) return FeatureMapKind::silu;
    return FeatureMapKind::identity;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::auto_pick: return "auto";
        case Strategy::parallel: return "parallel";
        case Strategy::recurrent: return "recurrent";
        case Strategy::chunkwise: return "chunkwise";
    }
    throw std::logic_error("to_string: unknown strategy");
}

Strategy strategy_from_string(std::string_view name) {
    if (name == "auto") return Strategy::auto_pick;
    if (name == "parallel") return Strategy::parallel;
    if (name == "recurrent") return Strategy::recurrent;
    if (name == "chunkwise") return Strategy::chunkwise;
    throw std::invalid_argument("unknown strategy: " + std::string(name));
}

void AttentionConfig::validate() const {
    if (seq_len == 0) throw std::invalid_argument("config: seq_len must be >= 1");
    if (heads == 0) throw std::invalid_argument("config: heads must be >= 1");
    if (key_dim == 0) throw std::invalid_argument("config: key_dim must be >= 1");
    if (value_dim == 0) throw std::invalid_argument("config: value_dim must be >= 1");
    if (chunk_size == 0) throw std::invalid_argument("config: chunk_size must be >= 1");
}

SequenceBatch SequenceBatch::random(const AttentionConfig& config, Rng& rng) {
    config.validate();
    SequenceBatch b;
    for (std::size_t h = 0; h < config.heads; ++h)
        b.q.push_back(random_matrix(rng, config.seq_len, config.key_dim, 1.0));
    for (std::size_t h = 0; h < config.heads; ++h)
        b.k.push_back(random_matrix(rng, config.seq_len, config.key_dim, 1.0));
    for (std::size_t h = 0; h < config.heads; ++h)
        b.v.push_back(random_matrix(rng, config.seq_len, config.value_dim, 1.0));
    b.x = random_matrix(rng, config.seq_len, config.model_dim(), 1.0);
    return b;
}

SequenceBatch SequenceBatch::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > seq_len()) throw std::invalid_argument("slice_rows: bad range");
    auto slice = [&](const Matrix& m) {
        Matrix out(end - begin, m.cols());
        for (std::size_t t = begin; t < end; ++t)
            for (std::size_t c = 0; c < m.cols(); ++c) out(t - begin, c) = m(t, c);
        return out;
    };
    SequenceBatch b;
    for (const auto& m : q) b.q.push_back(slice(m));
    for (const auto& m : k) b.k.push_back(slice(m));
    for (const auto& m : v) b.v.push_back(slice(m));
    if (!x.empty()) b.x = slice(x);
    return b;
}

void SequenceBatch::validate(const AttentionConfig& config) const {
    config.validate();
    if (q.size() != config.heads || k.size() != config.heads || v.size() != config.heads)
        throw std::invalid_argument("batch: head count disagrees with config");
    const std::size_t L = config.seq_len;
    for (std::size_t h = 0; h < config.heads; ++h) {
        if (q[h].rows() != L || q[h].cols() != config.key_dim)
            throw std::invalid_argument("batch: q shape mismatch");
        if (k[h].rows() != L || k[h].cols() != config.key_dim)
            throw std::invalid_argument("batch: k shape mismatch");
        if (v[h].rows() != L || v[h].cols() != config.value_dim)
            throw std::invalid_argument("batch: v shape mismatch");
        if (!q[h].is_finite() || !k[h].is_finite() || !v[h].is_finite())
            throw std::domain_error("batch: non-finite projections");
    }
    if (!x.empty()) {
        if (x.rows() != L || x.cols() != config.model_dim())
            throw std::invalid_argument("batch: x shape mismatch");
        if (!x.is_finite()) throw std::domain_error("batch: non-finite token stream");
    }
}

std::vector<double> GateWeights::default_gamma(std::size_t heads) {
    std::vector<double> g(heads);
    for (std::size_t h = 0; h < heads; ++h) g[h] = 1.0 - std::pow(2.0, -5.0 - double(h));
    return g;
}

GateWeights GateWeights::random(const AttentionConfig& config, Rng& rng) {
    config.validate();
    GateWeights w;
    const double gate_scale = 1.0 / std::sqrt(double(config.key_dim));
    const double source_scale = 1.0 / std::sqrt(double(config.model_dim()));
    w.w_gq = random_matrix(rng, config.key_dim, config.heads, gate_scale);
    w.w_gk = random_matrix(rng, config.key_dim, config.heads, gate_scale);
    w.gamma = default_gamma(config.heads);
    w.alpha_source = random_matrix(rng, config.model_dim(), config.key_dim, source_scale);
    w.beta_source = random_matrix(rng, config.model_dim(), 1, source_scale);
    return w;
}

void GateWeights::validate(const AttentionConfig& config) const {
    if (!w_gq.empty() && (w_gq.rows() != config.key_dim || w_gq.cols() != config.heads))
        throw std::invalid_argument("weights: w_gq shape mismatch");
    if (!w_gk.empty() && (w_gk.rows() != config.key_dim || w_gk.cols() != config.heads))
        throw std::invalid_argument("weights: w_gk shape mismatch");
    if (!gamma.empty() && gamma.size() != config.heads)
        throw std::invalid_argument("weights: gamma must have one entry per head");
    for (double g : gamma)
        if (!(g > 0.0 && g <= 1.0))
            throw std::invalid_argument("weights: gamma entries must lie in (0, 1]");
    if (!alpha_source.empty() &&
        (alpha_source.rows() != config.model_dim() || alpha_source.cols() != config.key_dim))
        throw std::invalid_argument("weights: alpha_source shape mismatch");
    if (!beta_source.empty() &&
        (beta_source.rows() != config.model_dim() || beta_source.cols() != 1))
        throw std::invalid_argument("weights: beta_source shape mismatch");
    if (force_alpha && !(*force_alpha > 0.0 && *force_alpha <= 1.0))
        throw std::invalid_argument("weights: force_alpha must lie in (0, 1]");
    if (force_beta && !(*force_beta > 0.0 && *force_beta <= 1.0))
        throw std::invalid_argument("weights: force_beta must lie in (0, 1]");
}

Matrix head_gates(const std::vector<Matrix>& per_head_proj, const Matrix& w_g) {
    if (per_head_proj.empty()) throw std::invalid_argument("head_gates: no projections");
    const std::size_t heads = w_g.cols();
    const std::size_t key_dim = w_g.rows();
    if (per_head_proj.size() != heads)
        throw std::invalid_argument("head_gates: head count disagrees with w_g columns");
    const std::size_t seq_len = per_head_proj[0].rows();
    for (const auto& p : per_head_proj)
        if (p.rows() != seq_len || p.cols() != key_dim)
            throw std::invalid_argument("head_gates: projection shape mismatch");
    Matrix scores(seq_len, heads);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < seq_len; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i < key_dim; ++i) s += per_head_proj[h](t, i) * w_g(i, h);
            scores(t, h) = s;
        }
    return softmax_rows(scores);
}

Matrix unit_gate_matrix(std::size_t seq_len, std::size_t heads) {
    return Matrix(seq_len, heads, 1.0);
}

std::vector<Matrix> full_attention(const SequenceBatch& batch, const AttentionConfig& config) {
    batch.validate(config);
    const std::size_t L = config.seq_len;
    const double inv_sqrt_d = 1.0 / std::sqrt(double(config.key_dim));
    // The causal score map is materialized; this is the quadratic-memory form.
    auto scores = std::make_unique_for_overwrite<double[]>(L * L);
    std::vector<Matrix> outputs;
    outputs.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const Matrix& Q = batch.q[h];
        const Matrix& K = batch.k[h];
        const Matrix& V = batch.v[h];
        Matrix y(L, config.value_dim, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            double* row = scores.get() + t * L;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= t; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < config.key_dim; ++i) s += Q(t, i) * K(j, i);
                row[j] = s * inv_sqrt_d;
                mx = std::max(mx, row[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j <= t; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            const double inv = 1.0 / sum;
            for (std::size_t j = 0; j <= t; ++j) {
                const double a = row[j] * inv;
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += a * V(j, c);
            }
        }
        outputs.push_back(std::move(y));
    }
    return outputs;
}

std::vector<Matrix> sla_parallel(const SequenceBatch& batch, const Matrix& gates_q,
                                 const Matrix& gates_k, const AttentionConfig& config) {
    batch.validate(config);
    const std::size_t L = config.seq_len;
    check_gate_matrix(gates_q, L, config.heads, "sla_parallel gates_q");
    check_gate_matrix(gates_k, L, config.heads, "sla_parallel gates_k");
    std::vector<Matrix> outputs;
    outputs.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const Matrix aq = gated_features(batch.q[h], gates_q, h, config.feature_map);
        const Matrix ak = gated_features(batch.k[h], gates_k, h, config.feature_map);
        const Matrix& V = batch.v[h];
        Matrix y(L, config.value_dim, 0.0);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t j = 0; j <= t; ++j) {
                double w = 0.0;
                for (std::size_t i = 0; i < config.key_dim; ++i) w += aq(t, i) * ak(j, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += w * V(j, c);
            }
        outputs.push_back(std::move(y));
    }
    return outputs;
}

std::vector<Matrix> linear_parallel(const SequenceBatch& batch, const AttentionConfig& config) {
    const Matrix unit = unit_gate_matrix(config.seq_len, config.heads);
    return sla_parallel(batch, unit, unit, config);
}

RecurrentResult sla_recurrent(const SequenceBatch& batch, const Matrix& gates_q,
                              const Matrix& gates_k, const AttentionConfig& config,
                              HeadStates initial) {
    batch.validate(config);
    const std::size_t L = config.seq_len;
    check_gate_matrix(gates_q, L, config.heads, "sla_recurrent gates_q");
    check_gate_matrix(gates_k, L, config.heads, "sla_recurrent gates_k");
    check_head_states(config, initial);
    RecurrentResult result;
    result.states = std::move(initial);
    result.outputs.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const Matrix phi_q = feature_map(batch.q[h], config.feature_map);
        const Matrix phi_k = feature_map(batch.k[h], config.feature_map);
        const Matrix& V = batch.v[h];
        Matrix& S = result.states[h].s;
        Matrix y(L, config.value_dim, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            const double gk = gates_k(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double w = gk * phi_k(t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) S(i, c) += w * V(t, c);
            }
            const double gq = gates_q(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double a = gq * phi_q(t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += a * S(i, c);
            }
        }
        result.states[h].t += L;
        result.outputs.push_back(std::move(y));
    }
    return result;
}

RecurrentResult linear_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                                 HeadStates initial) {
    const Matrix unit = unit_gate_matrix(config.seq_len, config.heads);
    return sla_recurrent(batch, unit, unit, config, std::move(initial));
}

RecurrentResult retnet_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                                 const std::vector<double>& gamma, const Matrix* gates_q,
                                 const Matrix* gates_k, HeadStates initial) {
    batch.validate(config);
    if (gamma.size() != config.heads)
        throw std::invalid_argument("retnet_recurrent: gamma must have one entry per head");
    for (double g : gamma)
        if (!(g > 0.0 && g <= 1.0))
            throw std::invalid_argument("retnet_recurrent: gamma entries must lie in (0, 1]");
    const std::size_t L = config.seq_len;
    const Matrix unit = unit_gate_matrix(L, config.heads);
    const Matrix& gq_m = gates_q ? *gates_q : unit;
    const Matrix& gk_m = gates_k ? *gates_k : unit;
    check_gate_matrix(gq_m, L, config.heads, "retnet_recurrent gates_q");
    check_gate_matrix(gk_m, L, config.heads, "retnet_recurrent gates_k");
    check_head_states(config, initial);
    RecurrentResult result;
    result.states = std::move(initial);
    result.outputs.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const Matrix phi_q = feature_map(batch.q[h], config.feature_map);
        const Matrix phi_k = feature_map(batch.k[h], config.feature_map);
        const Matrix& V = batch.v[h];
        const double decay = gamma[h];
        Matrix& S = result.states[h].s;
        Matrix y(L, config.value_dim, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            const double gk = gk_m(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double w = gk * phi_k(t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c)
                    S(i, c) = decay * S(i, c) + w * V(t, c);
            }
            const double gq = gq_m(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double a = gq * phi_q(t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += a * S(i, c);
            }
        }
        result.states[h].t += L;
        result.outputs.push_back(std::move(y));
    }
    return result;
}

RecurrentResult gla_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                              const GateWeights& weights, const Matrix* gates_q,
                              const Matrix* gates_k, HeadStates initial) {
    batch.validate(config);
    weights.validate(config);
    if (!weights.force_alpha && weights.alpha_source.empty())
        throw std::invalid_argument("gla_recurrent: alpha_source required without force_alpha");
    if (!weights.force_alpha && batch.x.empty())
        throw std::invalid_argument("gla_recurrent: batch.x required without force_alpha");
    const std::size_t L = config.seq_len;
    const Matrix unit = unit_gate_matrix(L, config.heads);
    const Matrix& gq_m = gates_q ? *gates_q : unit;
    const Matrix& gk_m = gates_k ? *gates_k : unit;
    check_gate_matrix(gq_m, L, config.heads, "gla_recurrent gates_q");
    check_gate_matrix(gk_m, L, config.heads, "gla_recurrent gates_k");
    check_head_states(config, initial);

    // alpha_t is shared across heads: one forget vector per token.
    std::vector<double> alpha(config.key_dim);
    RecurrentResult result;
    result.states = std::move(initial);
    result.outputs.reserve(config.heads);
    std::vector<Matrix> phi_q(config.heads), phi_k(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        phi_q[h] = feature_map(batch.q[h], config.feature_map);
        phi_k[h] = feature_map(batch.k[h], config.feature_map);
        result.outputs.emplace_back(L, config.value_dim, 0.0);
    }
    for (std::size_t t = 0; t < L; ++t) {
        if (weights.force_alpha) {
            std::fill(alpha.begin(), alpha.end(), *weights.force_alpha);
        } else {
            for (std::size_t i = 0; i < config.key_dim; ++i)
                alpha[i] = source_sigmoid(batch.x.row(t), weights.alpha_source, i, "gla alpha");
        }
        for (std::size_t h = 0; h < config.heads; ++h) {
            Matrix& S = result.states[h].s;
            Matrix& y = result.outputs[h];
            const Matrix& V = batch.v[h];
            const double gk = gk_m(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double w = gk * phi_k[h](t, i);
                const double a = alpha[i];
                for (std::size_t c = 0; c < config.value_dim; ++c)
                    S(i, c) = a * S(i, c) + w * V(t, c);
            }
            const double gq = gq_m(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double aq = gq * phi_q[h](t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += aq * S(i, c);
            }
        }
    }
    for (std::size_t h = 0; h < config.heads; ++h) result.states[h].t += L;
    return result;
}

RecurrentResult gdn_recurrent(const SequenceBatch& batch, const AttentionConfig& config,
                              const GateWeights& weights, const Matrix* gates_q,
                              const Matrix* gates_k, HeadStates initial) {
    batch.validate(config);
    weights.validate(config);
    if (!weights.force_beta && weights.beta_source.empty())
        throw std::invalid_argument("gdn_recurrent: beta_source required without force_beta");
    if (!weights.force_alpha && weights.alpha_source.empty())
        throw std::invalid_argument("gdn_recurrent: alpha_source required without force_alpha");
    if ((!weights.force_beta || !weights.force_alpha) && batch.x.empty())
        throw std::invalid_argument("gdn_recurrent: batch.x required without forced gates");
    const std::size_t L = config.seq_len;
    const Matrix unit = unit_gate_matrix(L, config.heads);
    const Matrix& gq_m = gates_q ? *gates_q : unit;
    const Matrix& gk_m = gates_k ? *gates_k : unit;
    check_gate_matrix(gq_m, L, config.heads, "gdn_recurrent gates_q");
    check_gate_matrix(gk_m, L, config.heads, "gdn_recurrent gates_k");
    check_head_states(config, initial);

    RecurrentResult result;
    result.states = std::move(initial);
    result.outputs.reserve(config.heads);
    std::vector<Matrix> phi_q(config.heads), phi_k(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        phi_q[h] = feature_map(batch.q[h], config.feature_map);
        phi_k[h] = feature_map(batch.k[h], config.feature_map);
        result.outputs.emplace_back(L, config.value_dim, 0.0);
    }
    std::vector<double> kappa(config.key_dim);
    std::vector<double> correction(config.value_dim);
    for (std::size_t t = 0; t < L; ++t) {
        const double alpha = weights.force_alpha
                                 ? *weights.force_alpha
                                 : source_sigmoid(batch.x.row(t), weights.alpha_source, 0,
                                                  "gdn alpha");
        const double beta = weights.force_beta
                                ? *weights.force_beta
                                : source_sigmoid(batch.x.row(t), weights.beta_source, 0,
                                                 "gdn beta");
        for (std::size_t h = 0; h < config.heads; ++h) {
            Matrix& S = result.states[h].s;
            Matrix& y = result.outputs[h];
            const Matrix& V = batch.v[h];
            double norm_sq = 0.0;
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                kappa[i] = phi_k[h](t, i);
                norm_sq += kappa[i] * kappa[i];
            }
            if (norm_sq > 0.0) {
                const double inv_norm = 1.0 / std::sqrt(norm_sq);
                for (double& v : kappa) v *= inv_norm;
            }  // zero phi(k): kappa stays zero and the step only decays
            if (alpha != 1.0)
                for (double& v : S.data()) v *= alpha;
            // delta-rule correction toward the gated target value
            const double gk = gk_m(t, h);
            for (std::size_t c = 0; c < config.value_dim; ++c) {
                double pred = 0.0;
                for (std::size_t i = 0; i < config.key_dim; ++i) pred += kappa[i] * S(i, c);
                correction[c] = beta * (gk * V(t, c) - pred);
            }
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double ki = kappa[i];
                if (ki == 0.0) continue;
                for (std::size_t c = 0; c < config.value_dim; ++c) S(i, c) += ki * correction[c];
            }
            const double gq = gq_m(t, h);
            for (std::size_t i = 0; i < config.key_dim; ++i) {
                const double aq = gq * phi_q[h](t, i);
                for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += aq * S(i, c);
            }
        }
    }
    for (std::size_t h = 0; h < config.heads; ++h) result.states[h].t += L;
    return result;
}

std::vector<Matrix> sla_chunkwise(const SequenceBatch& batch, const Matrix& gates_q,
                                  const Matrix& gates_k, const AttentionConfig& config) {
    batch.validate(config);
    const std::size_t L = config.seq_len;
    check_gate_matrix(gates_q, L, config.heads, "sla_chunkwise gates_q");
    check_gate_matrix(gates_k, L, config.heads, "sla_chunkwise gates_k");
    const std::size_t C = config.chunk_size;
    std::vector<Matrix> outputs;
    outputs.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const Matrix aq = gated_features(batch.q[h], gates_q, h, config.feature_map);
        const Matrix ak = gated_features(batch.k[h], gates_k, h, config.feature_map);
        const Matrix& V = batch.v[h];
        Matrix S(config.key_dim, config.value_dim, 0.0);
        Matrix y(L, config.value_dim, 0.0);
        for (std::size_t begin = 0; begin < L; begin += C) {
            const std::size_t end = std::min(begin + C, L);
            for (std::size_t t = begin; t < end; ++t) {
                // inter-chunk read of the carried state (no state yet in chunk 0)
                if (begin > 0)
                    for (std::size_t i = 0; i < config.key_dim; ++i) {
                        const double a = aq(t, i);
                        for (std::size_t c = 0; c < config.value_dim; ++c)
                            y(t, c) += a * S(i, c);
                    }
                // intra-chunk causal quadratic form
                for (std::size_t j = begin; j <= t; ++j) {
                    double w = 0.0;
                    for (std::size_t i = 0; i < config.key_dim; ++i) w += aq(t, i) * ak(j, i);
                    for (std::size_t c = 0; c < config.value_dim; ++c) y(t, c) += w * V(j, c);
                }
            }
            for (std::size_t j = begin; j < end; ++j)
                for (std::size_t i = 0; i < config.key_dim; ++i) {
                    const double w = ak(j, i);
                    for (std::size_t c = 0; c < config.value_dim; ++c) S(i, c) += w * V(j, c);
                }
        }
        outputs.push_back(std::move(y));
    }
    return outputs;
}

std::vector<Matrix> linear_chunkwise(const SequenceBatch& batch, const AttentionConfig& config) {
    const Matrix unit = unit_gate_matrix(config.seq_len, config.heads);
    return sla_chunkwise(batch, unit, unit, config);
}

MechanismRun run_mechanism(const SequenceBatch& batch, const AttentionConfig& config,
                           const GateWeights& weights, Strategy strategy) {
    batch.validate(config);
    weights.validate(config);
    const std::size_t L = config.seq_len;
    MechanismRun run;
    if (is_gated(config.mechanism) && !weights.unit_gates) {
        if (weights.w_gq.empty() || weights.w_gk.empty())
            throw std::invalid_argument("run_mechanism: gated mechanism needs w_gq and w_gk");
        run.gates_q = head_gates(batch.q, weights.w_gq);
        run.gates_k = head_gates(batch.k, weights.w_gk);
    } else {
        run.gates_q = unit_gate_matrix(L, config.heads);
        run.gates_k = unit_gate_matrix(L, config.heads);
    }

    const MechanismKind base = base_of(config.mechanism);
    Strategy s = strategy;
    if (s == Strategy::auto_pick)
        s = base == MechanismKind::full_softmax ? Strategy::parallel : Strategy::recurrent;

    auto require_recurrent_only = [&] {
        if (s != Strategy::recurrent)
            throw std::invalid_argument("run_mechanism: " + to_string(config.mechanism) +
                                        " supports only the recurrent strategy");
    };

    switch (base) {
        case MechanismKind::full_softmax:
            if (s != Strategy::parallel)
                throw std::invalid_argument(
                    "run_mechanism: full-softmax supports only the parallel strategy");
            run.outputs = full_attention(batch, config);
            break;
        case MechanismKind::linear: {
            if (s == Strategy::parallel) {
                run.outputs = sla_parallel(batch, run.gates_q, run.gates_k, config);
            } else if (s == Strategy::chunkwise) {
                run.outputs = sla_chunkwise(batch, run.gates_q, run.gates_k, config);
            } else {
                auto r = sla_recurrent(batch, run.gates_q, run.gates_k, config);
                run.outputs = std::move(r.outputs);
                run.states = std::move(r.states);
            }
            break;
        }
        case MechanismKind::retnet: {
            require_recurrent_only();
            const std::vector<double> gamma =
                weights.gamma.empty() ? GateWeights::default_gamma(config.heads) : weights.gamma;
            auto r = retnet_recurrent(batch, config, gamma, &run.gates_q, &run.gates_k);
            run.outputs = std::move(r.outputs);
            run.states = std::move(r.states);
            break;
        }
        case MechanismKind::gla: {
            require_recurrent_only();
            auto r = gla_recurrent(batch, config, weights, &run.gates_q, &run.gates_k);
            run.outputs = std::move(r.outputs);
            run.states = std::move(r.states);
            break;
        }
        case MechanismKind::gdn: {
            require_recurrent_only();
            auto r = gdn_recurrent(batch, config, weights, &run.gates_q, &run.gates_k);
            run.outputs = std::move(r.outputs);
            run.states = std::move(r.states);
            break;
        }
        default: throw std::logic_error("run_mechanism: unhandled mechanism");
    }
    return run;
}

std::size_t count_gate_params(std::size_t layers, std::size_t key_dim, std::size_t heads) {
    if (layers == 0 || key_dim == 0 || heads == 0)
        throw std::invalid_argument("count_gate_params: arguments must be positive");
    return 2 * key_dim * heads * layers;
}

}  // namespace sla
