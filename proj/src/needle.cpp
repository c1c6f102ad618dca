#include "sla/needle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>

namespace sla::needle {

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        const double n = norm(v);
        if (n > 1e-6) {
            for (double& x : v) x /= n;
            return v;
        }
    }
    throw std::logic_error("random_unit: generator kept producing near-zero vectors");
}

void check_options(const NeedleOptions& o) {
    if (!(o.noise_scale >= 0.0)) throw std::invalid_argument("needle: noise_scale must be >= 0");
    if (!(o.logit_gap >= 0.0)) throw std::invalid_argument("needle: logit_gap must be >= 0");
    if (!(o.min_distractor_sim > 0.0 && o.min_distractor_sim < o.max_distractor_sim &&
          o.max_distractor_sim < 1.0))
        throw std::invalid_argument("needle: need 0 < min_distractor_sim < max_distractor_sim < 1");
}

}  // namespace

NeedleInstance build_needle_instance(std::size_t seq_len, std::size_t heads,
                                     std::size_t key_dim, std::size_t value_dim, Rng& rng,
                                     const NeedleOptions& options) {
    if (seq_len < 2) throw std::invalid_argument("needle: seq_len must be >= 2");
    check_options(options);

    NeedleInstance inst;
    inst.config.seq_len = seq_len;
    inst.config.heads = heads;
    inst.config.key_dim = key_dim;
    inst.config.value_dim = value_dim;
    inst.config.feature_map = FeatureMapKind::identity;
    inst.config.chunk_size = std::max<std::size_t>(1, seq_len / 4);
    inst.config.validate();

    const std::vector<double> needle_key = random_unit(rng, key_dim);
    std::vector<double> query = needle_key;
    {
        const std::vector<double> noise = random_unit(rng, key_dim);
        for (std::size_t i = 0; i < key_dim; ++i) query[i] += options.noise_scale * noise[i];
        const double n = norm(query);
        if (n <= 1e-9) throw std::invalid_argument("needle: noise cancelled the query");
        for (double& x : query) x /= n;
    }
    inst.needle_similarity = dot(std::span<const double>(query), std::span<const double>(needle_key));
    if (inst.needle_similarity <= options.max_distractor_sim)
        throw std::invalid_argument(
            "needle: noise_scale leaves the needle similarity below max_distractor_sim");

    inst.needle_pos = std::size_t(rng.next_u64() % seq_len);
    inst.needle_value = random_unit(rng, value_dim);

    Matrix keys(seq_len, key_dim, 0.0);
    Matrix values(seq_len, value_dim, 0.0);
    for (std::size_t t = 0; t < seq_len; ++t) {
        if (t == inst.needle_pos) {
            for (std::size_t i = 0; i < key_dim; ++i) keys(t, i) = needle_key[i];
            for (std::size_t c = 0; c < value_dim; ++c) values(t, c) = inst.needle_value[c];
            continue;
        }
        // distractor key with a prescribed, smaller cosine against the query
        const double sim = rng.uniform(options.min_distractor_sim, options.max_distractor_sim);
        std::vector<double> ortho = random_unit(rng, key_dim);
        double proj = 0.0;
        for (std::size_t i = 0; i < key_dim; ++i) proj += ortho[i] * query[i];
        for (std::size_t i = 0; i < key_dim; ++i) ortho[i] -= proj * query[i];
        const double on = norm(ortho);
        if (on > 1e-9)
            for (double& x : ortho) x /= on;
        else
            std::fill(ortho.begin(), ortho.end(), 0.0);  // no orthogonal direction (key_dim 1)
        const double residual = std::sqrt(std::max(0.0, 1.0 - sim * sim));
        for (std::size_t i = 0; i < key_dim; ++i)
            keys(t, i) = sim * query[i] + residual * ortho[i];
        for (std::size_t c = 0; c < value_dim; ++c) values(t, c) = rng.uniform(-1.0, 1.0);
    }

    Matrix queries = random_matrix(rng, seq_len, key_dim, 1.0);
    for (std::size_t i = 0; i < key_dim; ++i) queries(seq_len - 1, i) = query[i];

    inst.batch.q.assign(heads, queries);
    inst.batch.k.assign(heads, keys);
    inst.batch.v.assign(heads, values);
    inst.batch.x = Matrix::zeros(seq_len, inst.config.model_dim());

    // routing: the needle write and the final read go to head 0, distractor
    // writes cycle over the remaining heads
    inst.scores_q = Matrix::zeros(seq_len, heads);
    inst.scores_k = Matrix::zeros(seq_len, heads);
    inst.write_head.assign(seq_len, 0);
    std::size_t cycle = 0;
    for (std::size_t t = 0; t < seq_len; ++t) {
        std::size_t head = 0;
        if (t != inst.needle_pos && heads > 1) head = 1 + (cycle++ % (heads - 1));
        inst.write_head[t] = head;
        inst.scores_k(t, head) = options.logit_gap;
    }
    inst.scores_q(seq_len - 1, 0) = options.logit_gap;
    return inst;
}

RetrievalScore retrieval_score(const NeedleInstance& instance, MechanismKind mechanism) {
    if (mechanism != MechanismKind::linear && mechanism != MechanismKind::sla &&
        mechanism != MechanismKind::full_softmax)
        throw std::invalid_argument(
            "retrieval_score: mechanism must be linear, sla, or full-softmax");
    AttentionConfig config = instance.config;
    config.mechanism = mechanism;

    std::vector<Matrix> outputs;
    if (mechanism == MechanismKind::full_softmax) {
        outputs = full_attention(instance.batch, config);
    } else if (mechanism == MechanismKind::linear) {
        outputs = linear_recurrent(instance.batch, config).outputs;
    } else {
        const Matrix gq = softmax_rows(instance.scores_q);
        const Matrix gk = softmax_rows(instance.scores_k);
        outputs = sla_recurrent(instance.batch, gq, gk, config).outputs;
    }

    const std::size_t last = config.seq_len - 1;
    std::vector<double> out(config.value_dim, 0.0);
    for (std::size_t h = 0; h < config.heads; ++h)
        for (std::size_t c = 0; c < config.value_dim; ++c) out[c] += outputs[h](last, c);

    const double on = norm(out);
    const double vn = norm(instance.needle_value);
    if (on < 1e-300 || vn < 1e-300) return {0.0, true};
    double d = 0.0;
    for (std::size_t c = 0; c < config.value_dim; ++c) d += out[c] * instance.needle_value[c];
    return {d / (on * vn), false};
}

double needle_only_linear_score(const NeedleInstance& instance) {
    const AttentionConfig& config = instance.config;
    const std::size_t t = instance.needle_pos;
    const std::size_t last = config.seq_len - 1;
    double weight = 0.0;
    for (std::size_t i = 0; i < config.key_dim; ++i)
        weight += apply_feature(instance.batch.q[0](last, i), config.feature_map) *
                  apply_feature(instance.batch.k[0](t, i), config.feature_map);
    std::vector<double> out(config.value_dim);
    for (std::size_t c = 0; c < config.value_dim; ++c)
        out[c] = weight * instance.batch.v[0](t, c);
    const double on = norm(out);
    const double vn = norm(instance.needle_value);
    if (on < 1e-300 || vn < 1e-300) return 0.0;
    double d = 0.0;
    for (std::size_t c = 0; c < config.value_dim; ++c) d += out[c] * instance.needle_value[c];
    return d / (on * vn);
}

void CompareReport::write_csv(std::ostream& os) const {
    os << "L,mean_linear,mean_sla,mean_full,win_rate\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.seq_len << ',' << r.mean_linear << ',' << r.mean_sla << ',' << r.mean_full
           << ',' << r.win_rate << '\n';
}

CompareReport compare_mechanisms(const std::vector<std::uint64_t>& seeds,
                                 const std::vector<std::size_t>& seq_lens, std::size_t heads,
                                 std::size_t key_dim, std::size_t value_dim,
                                 const NeedleOptions& options) {
    if (seeds.empty()) throw std::invalid_argument("compare_mechanisms: no seeds");
    if (seq_lens.empty()) throw std::invalid_argument("compare_mechanisms: no sequence lengths");
    CompareReport report;
    for (const std::size_t L : seq_lens) {
        CompareRow row;
        row.seq_len = L;
        std::size_t wins = 0;
        for (const std::uint64_t seed : seeds) {
            Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * L));
            const NeedleInstance inst =
                build_needle_instance(L, heads, key_dim, value_dim, rng, options);
            const double lin = retrieval_score(inst, MechanismKind::linear).value;
            const double gated = retrieval_score(inst, MechanismKind::sla).value;
            const double full = retrieval_score(inst, MechanismKind::full_softmax).value;
            row.mean_linear += lin;
            row.mean_sla += gated;
            row.mean_full += full;
            if (gated >= lin) ++wins;
        }
        const double n = double(seeds.size());
        row.mean_linear /= n;
        row.mean_sla /= n;
        row.mean_full /= n;
        row.win_rate = double(wins) / n;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace sla::needle
