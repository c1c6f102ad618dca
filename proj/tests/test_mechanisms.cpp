#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sla/mechanisms.hpp"

using namespace sla;

namespace {

double outputs_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t h = 0; h < a.size(); ++h) worst = std::max(worst, max_abs_diff(a[h], b[h]));
    return worst;
}

AttentionConfig make_config(std::size_t L, std::size_t H, std::size_t dk, std::size_t dv,
                            FeatureMapKind fmap = FeatureMapKind::identity) {
    AttentionConfig c;
    c.seq_len = L;
    c.heads = H;
    c.key_dim = dk;
    c.value_dim = dv;
    c.feature_map = fmap;
    c.chunk_size = L;
    return c;
}

SequenceBatch replicated_batch(const AttentionConfig& config, const Matrix& q, const Matrix& k,
                               const Matrix& v) {
    SequenceBatch b;
    b.q.assign(config.heads, q);
    b.k.assign(config.heads, k);
    b.v.assign(config.heads, v);
    b.x = Matrix::zeros(config.seq_len, config.model_dim());
    return b;
}

double phi(double x, FeatureMapKind kind) { return apply_feature(x, kind); }

}  // namespace

TEST_CASE("name round trips and mechanism taxonomy") {
    for (const auto kind :
         {MechanismKind::full_softmax, MechanismKind::linear, MechanismKind::sla,
          MechanismKind::retnet, MechanismKind::softmax_retnet, MechanismKind::gla,
          MechanismKind::softmax_gla, MechanismKind::gdn, MechanismKind::softmax_gdn})
        CHECK(mechanism_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(mechanism_from_string("softmax"), std::invalid_argument);

    CHECK(is_gated(MechanismKind::sla));
    CHECK(is_gated(MechanismKind::softmax_gdn));
    CHECK_FALSE(is_gated(MechanismKind::linear));
    CHECK_FALSE(is_gated(MechanismKind::retnet));
    CHECK(base_of(MechanismKind::sla) == MechanismKind::linear);
    CHECK(base_of(MechanismKind::softmax_retnet) == MechanismKind::retnet);
    CHECK(base_of(MechanismKind::softmax_gla) == MechanismKind::gla);
    CHECK(base_of(MechanismKind::softmax_gdn) == MechanismKind::gdn);
    CHECK(base_of(MechanismKind::gla) == MechanismKind::gla);
    CHECK(default_feature_map(MechanismKind::gdn) == FeatureMapKind::silu);
    CHECK(default_feature_map(MechanismKind::softmax_gdn) == FeatureMapKind::silu);
    CHECK(default_feature_map(MechanismKind::sla) == FeatureMapKind::identity);

    for (const auto s : {Strategy::parallel, Strategy::recurrent, Strategy::chunkwise})
        CHECK(strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(strategy_from_string("blockwise"), std::invalid_argument);
}

TEST_CASE("config and weight validation") {
    AttentionConfig c = make_config(4, 2, 3, 3);
    CHECK(c.model_dim() == 6);
    c.key_dim = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    const AttentionConfig good = make_config(4, 2, 3, 3);
    Rng rng(1);
    GateWeights w = GateWeights::random(good, rng);
    w.gamma = {0.5};
    CHECK_THROWS_AS(w.validate(good), std::invalid_argument);
    w.gamma = {0.5, 1.5};
    CHECK_THROWS_AS(w.validate(good), std::invalid_argument);
    w.gamma = {0.5, 1.0};
    CHECK_NOTHROW(w.validate(good));
    w.force_alpha = 0.0;
    CHECK_THROWS_AS(w.validate(good), std::invalid_argument);
    w.force_alpha = 1.0;
    CHECK_NOTHROW(w.validate(good));
}

TEST_CASE("head gates: softmax competition across heads") {
    // one head: gate is identically 1
    const AttentionConfig c1 = make_config(3, 1, 2, 2);
    Rng rng(2);
    const SequenceBatch b1 = SequenceBatch::random(c1, rng);
    const Matrix g1 = head_gates(b1.q, random_matrix(rng, 2, 1, 1.0));
    for (std::size_t t = 0; t < 3; ++t) CHECK(g1(t, 0) == 1.0);

    // two heads, hand-computed scores s_{t,h} = <q_h[t], w[:, h]>
    const Matrix qh0 = Matrix::from_rows({{1.0, 0.0}});
    const Matrix qh1 = Matrix::from_rows({{0.0, 1.0}});
    const Matrix w = Matrix::from_rows({{1.0, 0.25}, {-0.5, 0.5}});
    const Matrix g = head_gates({qh0, qh1}, w);
    // scores: s_0 = q0 . w[:,0] = 1.0, s_1 = q1 . w[:,1] = 0.5
    CHECK(g(0, 0) == doctest::Approx(0.62245933120185459).epsilon(1e-15));
    CHECK(g(0, 1) == doctest::Approx(0.37754066879814546).epsilon(1e-15));

    CHECK_THROWS_AS(head_gates({qh0}, w), std::invalid_argument);
}

TEST_CASE("full attention: identical keys average the value prefix") {
    const AttentionConfig c = make_config(4, 1, 2, 1);
    const Matrix k(4, 2, 1.0);
    const Matrix q(4, 2, 0.3);
    const Matrix v = Matrix::from_rows({{1.0}, {2.0}, {3.0}, {4.0}});
    const auto y = full_attention(replicated_batch(c, q, k, v), c);
    CHECK(y[0](0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[0](1, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(y[0](2, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(y[0](3, 0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("full attention matches a hand-rolled softmax row") {
    const AttentionConfig c = make_config(3, 1, 2, 1);
    const Matrix q = Matrix::from_rows({{1.0, 0.0}, {0.5, 0.5}, {1.0, -1.0}});
    const Matrix k = Matrix::from_rows({{1.0, 1.0}, {-1.0, 0.5}, {0.0, 2.0}});
    const Matrix v = Matrix::from_rows({{2.0}, {-1.0}, {0.5}});
    const auto y = full_attention(replicated_batch(c, q, k, v), c);

    const double scale = 1.0 / std::sqrt(2.0);
    const double l0 = scale * (1.0 * 1.0 + (-1.0) * 1.0);   // <q_2, k_0>
    const double l1 = scale * (1.0 * (-1.0) + (-1.0) * 0.5);
    const double l2 = scale * (1.0 * 0.0 + (-1.0) * 2.0);
    const double z = std::exp(l0) + std::exp(l1) + std::exp(l2);
    const double expect =
        (std::exp(l0) * 2.0 + std::exp(l1) * (-1.0) + std::exp(l2) * 0.5) / z;
    CHECK(y[0](2, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("linear attention matches the unrolled sum") {
    const AttentionConfig c = make_config(2, 1, 2, 2);
    const Matrix q = Matrix::from_rows({{1.0, 2.0}, {0.5, -1.0}});
    const Matrix k = Matrix::from_rows({{1.0, 1.0}, {2.0, 0.0}});
    const Matrix v = Matrix::from_rows({{1.0, 0.0}, {3.0, -2.0}});
    const SequenceBatch b = replicated_batch(c, q, k, v);
    const auto y = linear_parallel(b, c);
    // y_0 = <q_0, k_0> v_0 = 3 [1, 0]; y_1 = <q_1, k_0> v_0 + <q_1, k_1> v_1
    CHECK(y[0](0, 0) == 3.0);
    CHECK(y[0](0, 1) == 0.0);
    CHECK(y[0](1, 0) == doctest::Approx(-0.5 * 1.0 + 1.0 * 3.0).epsilon(1e-15));
    CHECK(y[0](1, 1) == doctest::Approx(-0.5 * 0.0 + 1.0 * (-2.0)).epsilon(1e-15));

    const auto yr = linear_recurrent(b, c);
    CHECK(outputs_diff(y, yr.outputs) == 0.0);
}

TEST_CASE("relu feature map zeroes out all-negative keys") {
    AttentionConfig c = make_config(4, 2, 3, 2, FeatureMapKind::relu);
    Rng rng(4);
    SequenceBatch b = SequenceBatch::random(c, rng);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t i = 0; i < 3; ++i) b.k[h](t, i) = -std::abs(b.k[h](t, i)) - 0.1;
    const auto y = linear_parallel(b, c);
    for (std::size_t h = 0; h < 2; ++h) CHECK(max_abs(y[h]) == 0.0);
}

TEST_CASE("one-hot write gates exclude a token bitwise") {
    const AttentionConfig c = make_config(3, 2, 2, 2);
    const Matrix q = Matrix::from_rows({{0.3, -0.2}, {1.0, 0.4}, {-0.7, 0.9}});
    const Matrix k = Matrix::from_rows({{0.8, 0.1}, {5.0, -3.0}, {-0.4, 0.6}});
    const Matrix v = Matrix::from_rows({{1.0, 2.0}, {9.0, -9.0}, {0.5, -0.25}});
    const SequenceBatch full = replicated_batch(c, q, k, v);

    // token 1 writes only to head 1; reads stay on head 0
    const Matrix gk = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
    const Matrix gq = Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
    const auto gated = sla_recurrent(full, gq, gk, c);

    // reference: head 0 never sees token 1 at all
    const AttentionConfig c2 = make_config(2, 2, 2, 2);
    const Matrix q2 = Matrix::from_rows({{0.3, -0.2}, {-0.7, 0.9}});
    const Matrix k2 = Matrix::from_rows({{0.8, 0.1}, {-0.4, 0.6}});
    const Matrix v2 = Matrix::from_rows({{1.0, 2.0}, {0.5, -0.25}});
    const auto reduced = linear_recurrent(replicated_batch(c2, q2, k2, v2), c2);

    for (std::size_t col = 0; col < 2; ++col) {
        CHECK(gated.outputs[0](0, col) == reduced.outputs[0](0, col));
        CHECK(gated.outputs[0](2, col) == reduced.outputs[0](1, col));
        // head 1 is never read
        CHECK(gated.outputs[1](0, col) == 0.0);
        CHECK(gated.outputs[1](2, col) == 0.0);
    }
}

TEST_CASE("uniform read gates halve the two-head unit-gate output") {
    const AttentionConfig c = make_config(4, 2, 3, 3);
    Rng rng(6);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    const Matrix unit = unit_gate_matrix(4, 2);
    const Matrix half(4, 2, 0.5);
    const auto full = sla_recurrent(b, unit, unit, c);
    const auto halved = sla_recurrent(b, half, unit, c);
    for (std::size_t h = 0; h < 2; ++h) {
        Matrix scaled = full.outputs[h];
        scaled *= 0.5;
        CHECK(max_abs_diff(scaled, halved.outputs[h]) == 0.0);
    }
}

TEST_CASE("gate matrix validation") {
    const AttentionConfig c = make_config(3, 2, 2, 2);
    Rng rng(8);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    const Matrix unit = unit_gate_matrix(3, 2);

    Matrix bad_sum(3, 2, 0.45);  // rows sum to 0.9
    CHECK_THROWS_AS(sla_recurrent(b, bad_sum, unit, c), std::domain_error);
    CHECK_THROWS_AS(sla_recurrent(b, Matrix(2, 2, 0.5), unit, c), std::invalid_argument);
    Matrix nan_gate = unit;
    nan_gate(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sla_parallel(b, nan_gate, unit, c), std::domain_error);

    // near-distribution rows inside the 1e-9 budget are accepted
    Matrix near(3, 2, 0.5);
    near(0, 0) = 0.5 + 4e-10;
    CHECK_NOTHROW(sla_recurrent(b, near, unit, c));
}

TEST_CASE("chunkwise agrees with parallel across chunk sizes") {
    AttentionConfig c = make_config(19, 3, 4, 5);
    Rng rng(10);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    GateWeights w = GateWeights::random(c, rng);
    const Matrix gq = head_gates(b.q, w.w_gq);
    const Matrix gk = head_gates(b.k, w.w_gk);
    const auto reference = sla_parallel(b, gq, gk, c);

    c.chunk_size = 19;  // single chunk: identical arithmetic, bitwise equal
    CHECK(outputs_diff(reference, sla_chunkwise(b, gq, gk, c)) == 0.0);
    for (const std::size_t chunk : {std::size_t(1), std::size_t(7), std::size_t(16)}) {
        c.chunk_size = chunk;
        CHECK(outputs_diff(reference, sla_chunkwise(b, gq, gk, c)) <= 1e-12);
    }
}

TEST_CASE("retnet: scalar case matches the decayed sum") {
    const AttentionConfig c = make_config(3, 1, 1, 1);
    const Matrix ones(3, 1, 1.0);
    const Matrix v = Matrix::from_rows({{2.0}, {-4.0}, {1.0}});
    const auto r = retnet_recurrent(replicated_batch(c, ones, ones, v), c, {0.25});
    CHECK(r.outputs[0](0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r.outputs[0](1, 0) == doctest::Approx(0.25 * 2.0 - 4.0).epsilon(1e-15));
    CHECK(r.outputs[0](2, 0) ==
          doctest::Approx(0.0625 * 2.0 + 0.25 * (-4.0) + 1.0).epsilon(1e-15));
}

TEST_CASE("retnet matches the brute-force decayed unroll") {
    const AttentionConfig c = make_config(8, 2, 3, 3);
    Rng rng(12);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    const std::vector<double> gamma = {0.5, 0.9375};
    const auto r = retnet_recurrent(b, c, gamma);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t t = 0; t < 8; ++t)
            for (std::size_t col = 0; col < 3; ++col) {
                double expect = 0.0;
                for (std::size_t j = 0; j <= t; ++j) {
                    double w = 0.0;
                    for (std::size_t i = 0; i < 3; ++i) w += b.q[h](t, i) * b.k[h](j, i);
                    expect += std::pow(gamma[h], double(t - j)) * w * b.v[h](j, col);
                }
                CHECK(r.outputs[h](t, col) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("retnet parameter checks and default decay") {
    const AttentionConfig c = make_config(2, 1, 1, 1);
    Rng rng(13);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    CHECK_THROWS_AS(retnet_recurrent(b, c, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(retnet_recurrent(b, c, {1.25}), std::invalid_argument);
    CHECK_THROWS_AS(retnet_recurrent(b, c, {0.5, 0.5}), std::invalid_argument);
    CHECK_NOTHROW(retnet_recurrent(b, c, {1.0}));

    const auto gamma = GateWeights::default_gamma(3);
    CHECK(gamma[0] == 1.0 - std::pow(2.0, -5.0));
    CHECK(gamma[1] == 1.0 - std::pow(2.0, -6.0));
    CHECK(gamma[2] == 1.0 - std::pow(2.0, -7.0));
}

TEST_CASE("gla: forced alpha halves the carried state") {
    const AttentionConfig c = make_config(3, 1, 2, 2);
    Rng rng(14);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    GateWeights w;
    w.force_alpha = 0.5;
    const auto r = gla_recurrent(b, c, w);
    // alpha = 0.5 on every key coordinate is exactly retnet with gamma 0.5
    const auto ref = retnet_recurrent(b, c, {0.5});
    CHECK(outputs_diff(r.outputs, ref.outputs) == 0.0);

    w.force_alpha = 1.0;
    const auto undecayed = gla_recurrent(b, c, w);
    const auto lin = linear_recurrent(b, c);
    CHECK(outputs_diff(undecayed.outputs, lin.outputs) == 0.0);
}

TEST_CASE("gla matches the per-coordinate unrolled product") {
    const AttentionConfig c = make_config(6, 2, 3, 2);
    Rng rng(15);
    SequenceBatch b = SequenceBatch::random(c, rng);
    GateWeights w = GateWeights::random(c, rng);
    const auto r = gla_recurrent(b, c, w);

    for (std::size_t h = 0; h < 2; ++h) {
        Matrix state(3, 2, 0.0);
        for (std::size_t t = 0; t < 6; ++t) {
            std::vector<double> alpha(3);
            for (std::size_t i = 0; i < 3; ++i) {
                double logit = 0.0;
                for (std::size_t m = 0; m < c.model_dim(); ++m)
                    logit += b.x(t, m) * w.alpha_source(m, i);
                alpha[i] = sigmoid(logit);
            }
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t col = 0; col < 2; ++col)
                    state(i, col) = alpha[i] * state(i, col) + b.k[h](t, i) * b.v[h](t, col);
            for (std::size_t col = 0; col < 2; ++col) {
                double y = 0.0;
                for (std::size_t i = 0; i < 3; ++i) y += b.q[h](t, i) * state(i, col);
                CHECK(r.outputs[h](t, col) == doctest::Approx(y).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("gla rejects a saturated forget gate") {
    const AttentionConfig c = make_config(2, 1, 2, 2);
    Rng rng(16);
    SequenceBatch b = SequenceBatch::random(c, rng);
    b.x = Matrix(2, 2, 1.0);
    GateWeights w = GateWeights::random(c, rng);
    w.alpha_source = Matrix(2, 2, 500.0);  // logits ~1000: sigmoid rounds to 1
    CHECK_THROWS_AS(gla_recurrent(b, c, w), std::logic_error);
}

TEST_CASE("gdn: unit-strength write stores the value at the key direction") {
    const AttentionConfig c = make_config(1, 1, 2, 2);
    const Matrix q = Matrix::from_rows({{1.0, 0.0}});
    const Matrix k = Matrix::from_rows({{1.0, 0.0}});  // unit norm: kappa == k
    const Matrix v = Matrix::from_rows({{3.0, -1.5}});
    GateWeights w;
    w.force_alpha = 1.0;
    w.force_beta = 1.0;
    const auto r = gdn_recurrent(replicated_batch(c, q, k, v), c, w);
    CHECK(r.states[0].s(0, 0) == 3.0);
    CHECK(r.states[0].s(0, 1) == -1.5);
    CHECK(r.states[0].s(1, 0) == 0.0);
    CHECK(r.outputs[0](0, 0) == doctest::Approx(phi(1.0, FeatureMapKind::identity) * 3.0));
}

TEST_CASE("gdn: rewriting the same key replaces the stored value") {
    const AttentionConfig c = make_config(2, 1, 2, 2);
    const Matrix q(2, 2, 0.0);
    const Matrix k = Matrix::from_rows({{0.0, 1.0}, {0.0, 1.0}});
    const Matrix v = Matrix::from_rows({{5.0, 2.0}, {-1.0, 0.75}});
    GateWeights w;
    w.force_alpha = 1.0;
    w.force_beta = 1.0;
    const auto r = gdn_recurrent(replicated_batch(c, q, k, v), c, w);
    CHECK(r.states[0].s(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r.states[0].s(1, 1) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(std::abs(r.states[0].s(0, 0)) <= 1e-14);
}

TEST_CASE("gdn: zero-norm features decay the state and skip the write") {
    const AttentionConfig c = make_config(2, 1, 2, 1, FeatureMapKind::relu);
    const Matrix q(2, 2, 1.0);
    const Matrix k = Matrix::from_rows({{1.0, 0.0}, {-2.0, -3.0}});  // token 1: phi(k) == 0
    const Matrix v = Matrix::from_rows({{4.0}, {7.0}});
    GateWeights w;
    w.force_alpha = 0.5;
    w.force_beta = 1.0;
    const auto r = gdn_recurrent(replicated_batch(c, q, k, v), c, w);
    // step 0 stores 4 at e_0 (|phi(k_0)| = 1 after the 0.5 decay of nothing),
    // step 1 only halves it
    CHECK(r.states[0].s(0, 0) == doctest::Approx(0.5 * 4.0).epsilon(1e-14));
    CHECK(r.states[0].s(1, 0) == 0.0);
}

TEST_CASE("gdn matches the projection form and a two-step unroll") {
    const AttentionConfig c = make_config(5, 2, 3, 2, FeatureMapKind::silu);
    Rng rng(18);
    SequenceBatch b = SequenceBatch::random(c, rng);
    GateWeights w = GateWeights::random(c, rng);
    const auto r = gdn_recurrent(b, c, w);

    for (std::size_t h = 0; h < 2; ++h) {
        Matrix state(3, 2, 0.0);
        for (std::size_t t = 0; t < 5; ++t) {
            double alpha_logit = 0.0, beta_logit = 0.0;
            for (std::size_t m = 0; m < c.model_dim(); ++m) {
                alpha_logit += b.x(t, m) * w.alpha_source(m, 0);
                beta_logit += b.x(t, m) * w.beta_source(m, 0);
            }
            const double alpha = sigmoid(alpha_logit);
            const double beta = sigmoid(beta_logit);
            std::vector<double> kappa(3), phiq(3);
            double norm_sq = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                kappa[i] = phi(b.k[h](t, i), c.feature_map);
                phiq[i] = phi(b.q[h](t, i), c.feature_map);
                norm_sq += kappa[i] * kappa[i];
            }
            const double norm = std::sqrt(norm_sq);
            for (double& x : kappa) x = norm > 0.0 ? x / norm : 0.0;

            // decay, then correct toward v along kappa
            Matrix pre = state;
            pre *= alpha;
            for (std::size_t col = 0; col < 2; ++col) {
                double read = 0.0;
                for (std::size_t i = 0; i < 3; ++i) read += kappa[i] * pre(i, col);
                const double corr = beta * (b.v[h](t, col) - read);
                for (std::size_t i = 0; i < 3; ++i)
                    pre(i, col) += kappa[i] * corr;
            }
            state = pre;
            for (std::size_t col = 0; col < 2; ++col) {
                double y = 0.0;
                for (std::size_t i = 0; i < 3; ++i) y += phiq[i] * state(i, col);
                CHECK(r.outputs[h](t, col) == doctest::Approx(y).epsilon(1e-11));
            }
        }
        CHECK(max_abs_diff(state, r.states[h].s) <= 1e-12);
    }
}

TEST_CASE("gdn rejects a saturated write strength") {
    const AttentionConfig c = make_config(2, 1, 2, 2);
    Rng rng(19);
    SequenceBatch b = SequenceBatch::random(c, rng);
    b.x = Matrix(2, 2, 1.0);
    GateWeights w = GateWeights::random(c, rng);
    w.beta_source = Matrix(2, 1, 1000.0);
    CHECK_THROWS_AS(gdn_recurrent(b, c, w), std::logic_error);
}

TEST_CASE("run_mechanism dispatch and strategy restrictions") {
    AttentionConfig c = make_config(6, 2, 3, 3);
    Rng rng(20);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    const GateWeights w = GateWeights::random(c, rng);

    c.mechanism = MechanismKind::full_softmax;
    const auto full = run_mechanism(b, c, w);
    CHECK(full.states.empty());  // parallel form carries no recurrent state
    CHECK(full.gates_q(0, 0) == 1.0);
    CHECK_THROWS_AS(run_mechanism(b, c, w, Strategy::recurrent), std::invalid_argument);

    c.mechanism = MechanismKind::sla;
    const auto gated = run_mechanism(b, c, w);
    CHECK(gated.states.size() == 2);
    for (std::size_t t = 0; t < 6; ++t)
        CHECK(gated.gates_q(t, 0) + gated.gates_q(t, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const auto par = run_mechanism(b, c, w, Strategy::parallel);
    CHECK(outputs_diff(gated.outputs, par.outputs) <= 1e-12);

    c.mechanism = MechanismKind::retnet;
    CHECK_THROWS_AS(run_mechanism(b, c, w, Strategy::parallel), std::invalid_argument);
    CHECK_THROWS_AS(run_mechanism(b, c, w, Strategy::chunkwise), std::invalid_argument);
    CHECK_NOTHROW(run_mechanism(b, c, w, Strategy::recurrent));

    c.mechanism = MechanismKind::softmax_gla;
    GateWeights incomplete = w;
    incomplete.w_gq = Matrix();
    CHECK_THROWS_AS(run_mechanism(b, c, incomplete), std::invalid_argument);
}

TEST_CASE("streaming from a carried state matches the single pass") {
    const AttentionConfig c = make_config(10, 2, 3, 3);
    Rng rng(21);
    const SequenceBatch b = SequenceBatch::random(c, rng);
    const auto whole = linear_recurrent(b, c);

    AttentionConfig head_cfg = c;
    head_cfg.seq_len = 6;
    const auto first = linear_recurrent(b.slice_rows(0, 6), head_cfg);
    AttentionConfig tail_cfg = c;
    tail_cfg.seq_len = 4;
    const auto second = linear_recurrent(b.slice_rows(6, 10), tail_cfg, first.states);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t col = 0; col < 3; ++col)
                CHECK(second.outputs[h](t, col) ==
                      doctest::Approx(whole.outputs[h](6 + t, col)).epsilon(1e-12));
    CHECK(max_abs_diff(second.states[0].s, whole.states[0].s) <= 1e-12);
    CHECK(second.states[0].t == 10);  // counts all consumed tokens, both segments
}

TEST_CASE("write competition is local: losing gates leak nothing measurable") {
    const AttentionConfig c = make_config(2, 2, 2, 2);
    const Matrix q = Matrix::from_rows({{0.4, -0.2}, {0.9, 0.3}});
    const Matrix k = Matrix::from_rows({{0.7, -0.1}, {0.2, 0.8}});
    const Matrix v = Matrix::from_rows({{1.0, -1.0}, {0.5, 0.25}});
    const SequenceBatch b = replicated_batch(c, q, k, v);
    const Matrix gq = Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}});
    const Matrix exact = Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    const auto reference = sla_recurrent(b, gq, exact, c);

    // token 0 loses the head-0 write by a 50-logit margin
    Matrix scores = Matrix::from_rows({{0.0, 50.0}, {50.0, 0.0}});
    const auto leaky = sla_recurrent(b, gq, softmax_rows(scores), c);
    CHECK(outputs_diff(leaky.outputs, reference.outputs) <= 1e-18);

    // an 800-logit margin underflows: the losing gate is exactly zero
    scores(0, 1) = 800.0;
    scores(1, 0) = 800.0;
    const auto one_hot = sla_recurrent(b, gq, softmax_rows(scores), c);
    CHECK(outputs_diff(one_hot.outputs, reference.outputs) == 0.0);
}

TEST_CASE("gate parameter count") {
    CHECK(count_gate_params(24, 256, 4) == 49152);
    CHECK(count_gate_params(1, 1, 1) == 2);
    CHECK(count_gate_params(2, 3, 5) == 60);
    CHECK_THROWS_AS(count_gate_params(0, 256, 4), std::invalid_argument);
}
