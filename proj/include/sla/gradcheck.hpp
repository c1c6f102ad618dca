#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sla/mechanisms.hpp"

namespace sla::grad {

// Scalar probe loss over the gated linear attention forward pass:
// loss = sum_{t,h,c} probe(t, h*value_dim + c) * y_{h,t,c}, with the head
// gates computed from weights.w_gq / weights.w_gk. probe must be
// seq_len x (heads*value_dim).
double sla_loss(const SequenceBatch& batch, const GateWeights& weights,
                const AttentionConfig& config, const Matrix& probe);

struct GradBundle {
    std::vector<Matrix> d_q;  // per head, seq_len x key_dim
    std::vector<Matrix> d_k;
    std::vector<Matrix> d_v;  // per head, seq_len x value_dim
    Matrix d_wgq;             // key_dim x heads
    Matrix d_wgk;
};

// Reverse-mode gradients of sla_loss with respect to Q, K, V and the gate
// weight matrices. The key/query paths combine the feature-map derivative
// with the softmax gate Jacobian diag(g) - g g^T; relu uses the 0 subgradient
// at its kink, so finite-difference comparisons should avoid exact zeros.
GradBundle sla_backward(const SequenceBatch& batch, const GateWeights& weights,
                        const AttentionConfig& config, const Matrix& probe);

// Central finite differences entry by entry: (f(x+h e) - f(x-h e)) / (2h).
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, Matrix primal,
                        double step = 1e-5);

// Relative error max_ij |a - b| / max(|a|, |b|, 1e-8).
double max_relative_error(const Matrix& analytic, const Matrix& numeric);

struct PrimalResult {
    std::string primal;  // "Q", "K", "V", "W_GQ", "W_GK"
    double max_rel_err = 0.0;
    bool pass = false;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<PrimalResult> primals;
    bool pass = false;
};

struct GradcheckReport {
    AttentionConfig config;
    double tolerance = 1e-6;
    double fd_step = 1e-5;
    std::vector<SeedResult> seeds;
    bool all_pass = false;

    nlohmann::json to_json() const;
};

// Runs analytic-vs-numeric comparison for every primal on random instances,
// one per seed. Dims must stay small (seq_len <= 8, heads <= 4,
// key_dim/value_dim <= 4) so the finite-difference sweep stays cheap.
GradcheckReport gradcheck_report(const AttentionConfig& config,
                                 const std::vector<std::uint64_t>& seeds,
                                 double fd_step = 1e-5, double tolerance = 1e-6);

}  // namespace sla::grad
