#include "sla/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace sla::grad {

namespace {

void check_probe(const Matrix& probe, const AttentionConfig& config) {
    if (probe.rows() != config.seq_len || probe.cols() != config.heads * config.value_dim)
        throw std::invalid_argument("probe must be seq_len x (heads*value_dim)");
    if (!probe.is_finite()) throw std::domain_error("probe has non-finite entries");
}

void check_gradcheck_dims(const AttentionConfig& config) {
    config.validate();
    if (config.seq_len > 8 || config.heads > 4 || config.key_dim > 4 || config.value_dim > 4)
        throw std::invalid_argument(
            "gradcheck dims must satisfy seq_len <= 8, heads <= 4, key_dim/value_dim <= 4");
}

}  // namespace

double sla_loss(const SequenceBatch& batch, const GateWeights& weights,
                const AttentionConfig& config, const Matrix& probe) {
    batch.validate(config);
    weights.validate(config);
    check_probe(probe, config);
    const Matrix gates_q = head_gates(batch.q, weights.w_gq);
    const Matrix gates_k = head_gates(batch.k, weights.w_gk);
    const RecurrentResult r = sla_recurrent(batch, gates_q, gates_k, config);
    double loss = 0.0;
    for (std::size_t h = 0; h < config.heads; ++h)
        for (std::size_t t = 0; t < config.seq_len; ++t)
            for (std::size_t c = 0; c < config.value_dim; ++c)
                loss += probe(t, h * config.value_dim + c) * r.outputs[h](t, c);
    return loss;
}

GradBundle sla_backward(const SequenceBatch& batch, const GateWeights& weights,
                        const AttentionConfig& config, const Matrix& probe) {
    batch.validate(config);
    weights.validate(config);
    check_probe(probe, config);
    const std::size_t L = config.seq_len;
    const std::size_t H = config.heads;
    const std::size_t dk = config.key_dim;
    const std::size_t dv = config.value_dim;

    const Matrix gq = head_gates(batch.q, weights.w_gq);
    const Matrix gk = head_gates(batch.k, weights.w_gk);

    GradBundle grads;
    grads.d_wgq = Matrix::zeros(dk, H);
    grads.d_wgk = Matrix::zeros(dk, H);
    // gradients flowing into the gate values, before the softmax Jacobian
    Matrix dgq(L, H, 0.0), dgk(L, H, 0.0);
    std::vector<Matrix> dphi_q, dphi_k;

    for (std::size_t h = 0; h < H; ++h) {
        const Matrix phi_q = feature_map(batch.q[h], config.feature_map);
        const Matrix phi_k = feature_map(batch.k[h], config.feature_map);
        const Matrix& V = batch.v[h];

        // forward pass, keeping every state for the read-path gradients
        std::vector<Matrix> states;
        states.reserve(L);
        Matrix S(dk, dv, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            const double g = gk(t, h);
            for (std::size_t i = 0; i < dk; ++i) {
                const double w = g * phi_k(t, i);
                for (std::size_t c = 0; c < dv; ++c) S(i, c) += w * V(t, c);
            }
            states.push_back(S);
        }

        Matrix dpq(L, dk, 0.0), dpk(L, dk, 0.0), dv_h(L, dv, 0.0);
        Matrix G(dk, dv, 0.0);  // suffix sum of dL/dS_t
        std::vector<double> da(dk), db(dk);
        for (std::size_t t = L; t-- > 0;) {
            const double gqv = gq(t, h);
            const double gkv = gk(t, h);
            const Matrix& St = states[t];
            // read path: y_t = (gq phi_q_t) S_t, upstream gradient probe row
            for (std::size_t i = 0; i < dk; ++i) {
                double s = 0.0;
                for (std::size_t c = 0; c < dv; ++c)
                    s += probe(t, h * dv + c) * St(i, c);
                da[i] = s;  // dL/d(a_t)_i with a_t = gq phi_q_t
            }
            double dg = 0.0;
            for (std::size_t i = 0; i < dk; ++i) {
                dg += da[i] * phi_q(t, i);
                dpq(t, i) = gqv * da[i];
            }
            dgq(t, h) = dg;
            for (std::size_t i = 0; i < dk; ++i) {
                const double a = gqv * phi_q(t, i);
                for (std::size_t c = 0; c < dv; ++c) G(i, c) += a * probe(t, h * dv + c);
            }
            // write path: S_t = S_{t-1} + (gk phi_k_t)^T v_t, G = dL/dS_t
            for (std::size_t i = 0; i < dk; ++i) {
                double s = 0.0;
                for (std::size_t c = 0; c < dv; ++c) s += G(i, c) * V(t, c);
                db[i] = s;
            }
            double dgw = 0.0;
            for (std::size_t i = 0; i < dk; ++i) {
                dgw += db[i] * phi_k(t, i);
                dpk(t, i) = gkv * db[i];
            }
            dgk(t, h) = dgw;
            for (std::size_t c = 0; c < dv; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < dk; ++i) s += gkv * phi_k(t, i) * G(i, c);
                dv_h(t, c) = s;
            }
        }
        dphi_q.push_back(std::move(dpq));
        dphi_k.push_back(std::move(dpk));
        grads.d_v.push_back(std::move(dv_h));
    }

    // softmax gate Jacobian diag(g) - g g^T applied row by row, then the
    // score gradients split between the projections and the gate weights
    Matrix dsq(L, H, 0.0), dsk(L, H, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
        double common_q = 0.0, common_k = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            common_q += gq(t, h) * dgq(t, h);
            common_k += gk(t, h) * dgk(t, h);
        }
        for (std::size_t h = 0; h < H; ++h) {
            dsq(t, h) = gq(t, h) * (dgq(t, h) - common_q);
            dsk(t, h) = gk(t, h) * (dgk(t, h) - common_k);
        }
    }

    for (std::size_t h = 0; h < H; ++h) {
        Matrix dq(L, dk, 0.0), dkm(L, dk, 0.0);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t i = 0; i < dk; ++i) {
                dq(t, i) = dphi_q[h](t, i) * feature_derivative(batch.q[h](t, i),
                                                                config.feature_map) +
                           dsq(t, h) * weights.w_gq(i, h);
                dkm(t, i) = dphi_k[h](t, i) * feature_derivative(batch.k[h](t, i),
                                                                 config.feature_map) +
                            dsk(t, h) * weights.w_gk(i, h);
                grads.d_wgq(i, h) += dsq(t, h) * batch.q[h](t, i);
                grads.d_wgk(i, h) += dsk(t, h) * batch.k[h](t, i);
            }
        grads.d_q.push_back(std::move(dq));
        grads.d_k.push_back(std::move(dkm));
    }
    return grads;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, Matrix primal,
                        double step) {
    if (!(step > 0.0) || !std::isfinite(step))
        throw std::invalid_argument("finite_diff_grad: step must be finite and positive");
    Matrix grad(primal.rows(), primal.cols(), 0.0);
    for (std::size_t idx = 0; idx < primal.size(); ++idx) {
        const double saved = primal.data()[idx];
        primal.data()[idx] = saved + step;
        const double up = loss(primal);
        primal.data()[idx] = saved - step;
        const double down = loss(primal);
        primal.data()[idx] = saved;
        grad.data()[idx] = (up - down) / (2.0 * step);
    }
    return grad;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
    if (!analytic.same_shape(numeric))
        throw std::invalid_argument("max_relative_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data()[i];
        const double b = numeric.data()[i];
        const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
        worst = std::max(worst, std::abs(a - b) / denom);
    }
    return worst;
}

nlohmann::json GradcheckReport::to_json() const {
    nlohmann::json j;
    j["config"] = {{"seq_len", config.seq_len},
                   {"heads", config.heads},
                   {"key_dim", config.key_dim},
                   {"value_dim", config.value_dim},
                   {"feature_map", to_string(config.feature_map)}};
    j["tolerance"] = tolerance;
    j["fd_step"] = fd_step;
    j["all_pass"] = all_pass;
    j["seeds"] = nlohmann::json::array();
    for (const auto& s : seeds) {
        nlohmann::json js;
        js["seed"] = s.seed;
        js["pass"] = s.pass;
        js["primals"] = nlohmann::json::array();
        for (const auto& p : s.primals)
            js["primals"].push_back(
                {{"primal", p.primal}, {"max_rel_err", p.max_rel_err}, {"pass", p.pass}});
        j["seeds"].push_back(js);
    }
    return j;
}

GradcheckReport gradcheck_report(const AttentionConfig& config,
                                 const std::vector<std::uint64_t>& seeds, double fd_step,
                                 double tolerance) {
    check_gradcheck_dims(config);
    if (seeds.empty()) throw std::invalid_argument("gradcheck_report: no seeds");
    GradcheckReport report;
    report.config = config;
    report.tolerance = tolerance;
    report.fd_step = fd_step;
    report.all_pass = true;

    for (const std::uint64_t seed : seeds) {
        Rng rng(seed);
        SequenceBatch batch = SequenceBatch::random(config, rng);
        GateWeights weights = GateWeights::random(config, rng);
        const Matrix probe =
            random_matrix(rng, config.seq_len, config.heads * config.value_dim, 1.0);
        const GradBundle analytic = sla_backward(batch, weights, config, probe);

        SeedResult sr;
        sr.seed = seed;
        sr.pass = true;
        auto record = [&](const std::string& name, double err) {
            PrimalResult pr{name, err, err <= tolerance};
            sr.pass = sr.pass && pr.pass;
            sr.primals.push_back(std::move(pr));
        };

        auto head_primal_err = [&](std::vector<Matrix> SequenceBatch::*field,
                                   const std::vector<Matrix>& analytic_grads) {
            double err = 0.0;
            for (std::size_t h = 0; h < config.heads; ++h) {
                auto f = [&](const Matrix& m) {
                    SequenceBatch b = batch;
                    (b.*field)[h] = m;
                    return sla_loss(b, weights, config, probe);
                };
                const Matrix fd = finite_diff_grad(f, (batch.*field)[h], fd_step);
                err = std::max(err, max_relative_error(analytic_grads[h], fd));
            }
            return err;
        };
        record("Q", head_primal_err(&SequenceBatch::q, analytic.d_q));
        record("K", head_primal_err(&SequenceBatch::k, analytic.d_k));
        record("V", head_primal_err(&SequenceBatch::v, analytic.d_v));

        auto weight_primal_err = [&](Matrix GateWeights::*field, const Matrix& analytic_grad) {
            auto f = [&](const Matrix& m) {
                GateWeights w = weights;
                w.*field = m;
                return sla_loss(batch, w, config, probe);
            };
            const Matrix fd = finite_diff_grad(f, weights.*field, fd_step);
            return max_relative_error(analytic_grad, fd);
        };
        record("W_GQ", weight_primal_err(&GateWeights::w_gq, analytic.d_wgq));
        record("W_GK", weight_primal_err(&GateWeights::w_gk, analytic.d_wgk));

        report.all_pass = report.all_pass && sr.pass;
        report.seeds.push_back(std::move(sr));
    }
    return report;
}

}  // namespace sla::grad
