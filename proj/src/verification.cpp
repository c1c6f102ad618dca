#include "sla/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace sla::verify {

namespace {

constexpr double kStrategyTol = 1e-10;
constexpr double kReductionTol = 1e-12;
constexpr double kSaturatedAlphaTol = 1e-6;
constexpr double kStreamingTol = 1e-12;

std::size_t sample_size(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + rng.next_u64() % (hi - lo + 1);
}

Rng instance_rng(const VerifyOptions& options, std::size_t i) {
    return Rng(options.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
}

Matrix slice_gate_rows(const Matrix& g, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, g.cols());
    for (std::size_t t = begin; t < end; ++t)
        for (std::size_t h = 0; h < g.cols(); ++h) out(t - begin, h) = g(t, h);
    return out;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const std::vector<MechanismKind>& recurrent_mechanisms() {
    static const std::vector<MechanismKind> kinds = {
        MechanismKind::linear,      MechanismKind::sla,
        MechanismKind::retnet,      MechanismKind::softmax_retnet,
        MechanismKind::gla,         MechanismKind::softmax_gla,
        MechanismKind::gdn,         MechanismKind::softmax_gdn,
    };
    return kinds;
}

}  // namespace

double outputs_max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("outputs_max_diff: head count differs");
    double worst = 0.0;
    for (std::size_t h = 0; h < a.size(); ++h)
        worst = std::max(worst, max_abs_diff(a[h], b[h]));
    return worst;
}

RunReport strategy_equivalence(const VerifyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.suite = "strategy equivalence";
    double sla_rec = 0.0, sla_chunk = 0.0, lin_rec = 0.0, lin_chunk = 0.0;
    for (std::size_t i = 0; i < options.instances; ++i) {
        Rng rng = instance_rng(options, i);
        AttentionConfig config;
        config.seq_len = sample_size(rng, 2, options.max_seq_len);
        config.heads = sample_size(rng, 1, options.max_heads);
        config.key_dim = sample_size(rng, 1, options.max_dim);
        config.value_dim = sample_size(rng, 1, options.max_dim);
        config.feature_map = options.feature_map;
        config.mechanism = MechanismKind::sla;

        const SequenceBatch batch = SequenceBatch::random(config, rng);
        const GateWeights weights = GateWeights::random(config, rng);
        const Matrix gq = head_gates(batch.q, weights.w_gq);
        const Matrix gk = head_gates(batch.k, weights.w_gk);

        std::vector<std::size_t> chunks = {1, 7, 16, config.seq_len};
        chunks.erase(std::remove_if(chunks.begin(), chunks.end(),
                                    [&](std::size_t c) { return c > config.seq_len; }),
                     chunks.end());
        std::sort(chunks.begin(), chunks.end());
        chunks.erase(std::unique(chunks.begin(), chunks.end()), chunks.end());

        const auto sla_par = sla_parallel(batch, gq, gk, config);
        sla_rec = std::max(
            sla_rec, outputs_max_diff(sla_par, sla_recurrent(batch, gq, gk, config).outputs));
        const auto lin_par = linear_parallel(batch, config);
        lin_rec = std::max(
            lin_rec, outputs_max_diff(lin_par, linear_recurrent(batch, config).outputs));
        for (std::size_t c : chunks) {
            AttentionConfig cc = config;
            cc.chunk_size = c;
            sla_chunk = std::max(
                sla_chunk, outputs_max_diff(sla_par, sla_chunkwise(batch, gq, gk, cc)));
            lin_chunk =
                std::max(lin_chunk, outputs_max_diff(lin_par, linear_chunkwise(batch, cc)));
        }
    }
    const std::string n = std::to_string(options.instances) + " instances";
    report.add("sla parallel vs recurrent", sla_rec, kStrategyTol, n);
    report.add("sla parallel vs chunkwise {1,7,16,L}", sla_chunk, kStrategyTol, n);
    report.add("linear parallel vs recurrent", lin_rec, kStrategyTol, n);
    report.add("linear parallel vs chunkwise {1,7,16,L}", lin_chunk, kStrategyTol, n);
    report.elapsed_seconds = elapsed_since(start);
    return report;
}

RunReport reduction_laws(const VerifyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.suite = "reduction laws";
    const std::size_t instances = options.instances;
    const std::size_t max_L = std::min<std::size_t>(options.max_seq_len, 64);
    const std::size_t max_H = std::min<std::size_t>(options.max_heads, 4);
    const std::size_t max_d = std::min<std::size_t>(options.max_dim, 8);

    double single_head = 0.0;
    double unit_sla = 0.0, unit_retnet = 0.0, unit_gla = 0.0, unit_gdn = 0.0;
    double gamma_one = 0.0, saturated_alpha = 0.0;

    for (std::size_t i = 0; i < instances; ++i) {
        Rng rng = instance_rng(options, i);
        AttentionConfig config;
        config.seq_len = sample_size(rng, 2, max_L);
        config.heads = sample_size(rng, 1, max_H);
        config.key_dim = sample_size(rng, 1, max_d);
        config.value_dim = sample_size(rng, 1, max_d);
        config.feature_map = options.feature_map;

        const SequenceBatch batch = SequenceBatch::random(config, rng);
        GateWeights weights = GateWeights::random(config, rng);

        // gates forced to 1 reproduce the base mechanism
        auto unit_law = [&](MechanismKind gated, MechanismKind base, FeatureMapKind fmap) {
            AttentionConfig cg = config;
            cg.feature_map = fmap;
            cg.mechanism = gated;
            GateWeights wu = weights;
            wu.unit_gates = true;
            const auto gated_run = run_mechanism(batch, cg, wu);
            cg.mechanism = base;
            const auto base_run = run_mechanism(batch, cg, weights);
            return outputs_max_diff(gated_run.outputs, base_run.outputs);
        };
        unit_sla = std::max(unit_sla, unit_law(MechanismKind::sla, MechanismKind::linear,
                                               config.feature_map));
        unit_retnet = std::max(unit_retnet, unit_law(MechanismKind::softmax_retnet,
                                                     MechanismKind::retnet, config.feature_map));
        unit_gla = std::max(unit_gla, unit_law(MechanismKind::softmax_gla, MechanismKind::gla,
                                               config.feature_map));
        unit_gdn = std::max(unit_gdn, unit_law(MechanismKind::softmax_gdn, MechanismKind::gdn,
                                               FeatureMapKind::silu));

        // gamma = 1 turns gated retnet into sla
        {
            AttentionConfig cg = config;
            cg.mechanism = MechanismKind::softmax_retnet;
            GateWeights wg = weights;
            wg.gamma.assign(config.heads, 1.0);
            const auto retnet_run = run_mechanism(batch, cg, wg);
            cg.mechanism = MechanismKind::sla;
            const auto sla_run = run_mechanism(batch, cg, weights);
            gamma_one = std::max(gamma_one,
                                 outputs_max_diff(retnet_run.outputs, sla_run.outputs));
        }

        // saturated forget gate (logits 25 >= 20) turns gated gla into sla
        {
            SequenceBatch ones_batch = batch;
            ones_batch.x = Matrix(config.seq_len, config.model_dim(), 1.0);
            GateWeights wa = weights;
            wa.alpha_source =
                Matrix(config.model_dim(), config.key_dim, 25.0 / double(config.model_dim()));
            AttentionConfig cg = config;
            cg.mechanism = MechanismKind::softmax_gla;
            const auto gla_run = run_mechanism(ones_batch, cg, wa);
            cg.mechanism = MechanismKind::sla;
            const auto sla_run = run_mechanism(ones_batch, cg, weights);
            saturated_alpha = std::max(saturated_alpha,
                                       outputs_max_diff(gla_run.outputs, sla_run.outputs));
        }

        // a single head makes the gates exactly 1, so sla is linear
        {
            AttentionConfig c1 = config;
            c1.heads = 1;
            Rng rng1 = instance_rng(options, i + 7919);
            const SequenceBatch b1 = SequenceBatch::random(c1, rng1);
            GateWeights w1 = GateWeights::random(c1, rng1);
            c1.mechanism = MechanismKind::sla;
            const auto gated_run = run_mechanism(b1, c1, w1);
            c1.mechanism = MechanismKind::linear;
            const auto base_run = run_mechanism(b1, c1, w1);
            single_head =
                std::max(single_head, outputs_max_diff(gated_run.outputs, base_run.outputs));
        }
    }
    const std::string n = std::to_string(instances) + " instances";
    report.add("sla gates==1 vs linear", unit_sla, kReductionTol, n);
    report.add("softmax-retnet gates==1 vs retnet", unit_retnet, kReductionTol, n);
    report.add("softmax-gla gates==1 vs gla", unit_gla, kReductionTol, n);
    report.add("softmax-gdn gates==1 vs gdn", unit_gdn, kReductionTol, n);
    report.add("softmax-retnet gamma==1 vs sla", gamma_one, kReductionTol, n);
    report.add("softmax-gla saturated alpha vs sla", saturated_alpha, kSaturatedAlphaTol, n);
    report.add("sla single head vs linear", single_head, kReductionTol, n);
    report.elapsed_seconds = elapsed_since(start);
    return report;
}

RunReport causality_and_streaming(const VerifyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.suite = "causality and streaming";
    const std::size_t max_L = std::min<std::size_t>(options.max_seq_len, 48);
    const std::size_t max_H = std::min<std::size_t>(options.max_heads, 4);
    const std::size_t max_d = std::min<std::size_t>(options.max_dim, 8);

    for (const MechanismKind mech : recurrent_mechanisms()) {
        double causality = 0.0;
        double streaming = 0.0;
        for (std::size_t i = 0; i < options.instances; ++i) {
            Rng rng = instance_rng(options, i * recurrent_mechanisms().size() +
                                                std::size_t(mech));
            AttentionConfig config;
            config.seq_len = sample_size(rng, 2, max_L);
            config.heads = sample_size(rng, 1, max_H);
            config.key_dim = sample_size(rng, 1, max_d);
            config.value_dim = sample_size(rng, 1, max_d);
            config.feature_map = default_feature_map(mech);
            config.mechanism = mech;
            const std::size_t L = config.seq_len;

            const SequenceBatch batch = SequenceBatch::random(config, rng);
            const GateWeights weights = GateWeights::random(config, rng);
            const MechanismRun full = run_mechanism(batch, config, weights);

            // prefix zeroing: later tokens must not move earlier outputs
            const std::size_t cut = sample_size(rng, 0, L - 2);
            SequenceBatch zeroed = batch;
            for (std::size_t t = cut + 1; t < L; ++t) {
                for (std::size_t h = 0; h < config.heads; ++h)
                    for (std::size_t c = 0; c < config.key_dim; ++c) {
                        zeroed.q[h](t, c) = 0.0;
                        zeroed.k[h](t, c) = 0.0;
                    }
                for (std::size_t h = 0; h < config.heads; ++h)
                    for (std::size_t c = 0; c < config.value_dim; ++c) zeroed.v[h](t, c) = 0.0;
                for (std::size_t c = 0; c < config.model_dim(); ++c) zeroed.x(t, c) = 0.0;
            }
            const MechanismRun cut_run = run_mechanism(zeroed, config, weights);
            for (std::size_t h = 0; h < config.heads; ++h)
                for (std::size_t t = 0; t <= cut; ++t)
                    for (std::size_t c = 0; c < config.value_dim; ++c)
                        causality = std::max(causality,
                                             std::abs(full.outputs[h](t, c) -
                                                      cut_run.outputs[h](t, c)));

            // split at every t, carrying the recurrent state across the seam
            for (std::size_t split = 1; split < L; ++split) {
                const SequenceBatch head_part = batch.slice_rows(0, split);
                const SequenceBatch tail_part = batch.slice_rows(split, L);
                AttentionConfig chead = config;
                chead.seq_len = split;
                AttentionConfig ctail = config;
                ctail.seq_len = L - split;
                const Matrix gq_head = slice_gate_rows(full.gates_q, 0, split);
                const Matrix gk_head = slice_gate_rows(full.gates_k, 0, split);
                const Matrix gq_tail = slice_gate_rows(full.gates_q, split, L);
                const Matrix gk_tail = slice_gate_rows(full.gates_k, split, L);

                RecurrentResult first, second;
                switch (base_of(mech)) {
                    case MechanismKind::linear:
                        first = sla_recurrent(head_part, gq_head, gk_head, chead);
                        second = sla_recurrent(tail_part, gq_tail, gk_tail, ctail,
                                               std::move(first.states));
                        break;
                    case MechanismKind::retnet: {
                        const auto gamma = weights.gamma.empty()
                                               ? GateWeights::default_gamma(config.heads)
                                               : weights.gamma;
                        first = retnet_recurrent(head_part, chead, gamma, &gq_head, &gk_head);
                        second = retnet_recurrent(tail_part, ctail, gamma, &gq_tail, &gk_tail,
                                                  std::move(first.states));
                        break;
                    }
                    case MechanismKind::gla:
                        first = gla_recurrent(head_part, chead, weights, &gq_head, &gk_head);
                        second = gla_recurrent(tail_part, ctail, weights, &gq_tail, &gk_tail,
                                               std::move(first.states));
                        break;
                    case MechanismKind::gdn:
                        first = gdn_recurrent(head_part, chead, weights, &gq_head, &gk_head);
                        second = gdn_recurrent(tail_part, ctail, weights, &gq_tail, &gk_tail,
                                               std::move(first.states));
                        break;
                    default:
                        throw std::logic_error("causality_and_streaming: unexpected mechanism");
                }
                for (std::size_t h = 0; h < config.heads; ++h) {
                    for (std::size_t t = 0; t < split; ++t)
                        for (std::size_t c = 0; c < config.value_dim; ++c)
                            streaming = std::max(streaming,
                                                 std::abs(full.outputs[h](t, c) -
                                                          first.outputs[h](t, c)));
                    for (std::size_t t = split; t < L; ++t)
                        for (std::size_t c = 0; c < config.value_dim; ++c)
                            streaming = std::max(streaming,
                                                 std::abs(full.outputs[h](t, c) -
                                                          second.outputs[h](t - split, c)));
                }
            }
        }
        const std::string n = std::to_string(options.instances) + " instances";
        report.add(to_string(mech) + " causality (exact)", causality, 0.0, n);
        report.add(to_string(mech) + " streaming split", streaming, kStreamingTol, n);
    }
    report.elapsed_seconds = elapsed_since(start);
    return report;
}

RunReport run_all(const VerifyOptions& options) {
    RunReport report;
    report.suite = "verification";
    for (RunReport part : {strategy_equivalence(options), reduction_laws(options),
                           causality_and_streaming(options)}) {
        for (auto& c : part.cases) report.cases.push_back(std::move(c));
        report.elapsed_seconds += part.elapsed_seconds;
    }
    return report;
}

}  // namespace sla::verify
