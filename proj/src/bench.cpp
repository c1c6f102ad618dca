#include "sla/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace sla::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double checksum(const std::vector<Matrix>& outputs) {
    double s = 0.0;
    for (const Matrix& m : outputs)
        for (double v : m.data()) s += v;
    return s;
}

void check_spec(const BenchSpec& spec) {
    if (spec.pairs.empty()) throw std::invalid_argument("bench: no mechanism/strategy pairs");
    if (spec.seq_lens.empty()) throw std::invalid_argument("bench: no sequence lengths");
    if (spec.reps == 0) throw std::invalid_argument("bench: reps must be >= 1");
    for (const auto& p : spec.pairs)
        if (p.strategy == Strategy::auto_pick)
            throw std::invalid_argument("bench: pairs must name an explicit strategy");
    for (std::size_t L : spec.seq_lens)
        if (L == 0) throw std::invalid_argument("bench: seq_len must be >= 1");
}

std::vector<BenchPoint> run_pair(const BenchSpec& spec, const BenchPair& pair) {
    std::vector<BenchPoint> points;
    points.reserve(spec.seq_lens.size());
    for (const std::size_t L : spec.seq_lens) {
        AttentionConfig config;
        config.seq_len = L;
        config.heads = spec.heads;
        config.key_dim = spec.key_dim;
        config.value_dim = spec.value_dim;
        config.chunk_size = spec.chunk_size;
        config.feature_map = spec.feature_map;
        config.mechanism = pair.mechanism;

        Rng rng(spec.seed ^ (0x9e3779b97f4a7c15ULL * L));
        const SequenceBatch batch = SequenceBatch::random(config, rng);
        const GateWeights weights = GateWeights::random(config, rng);

        for (std::size_t w = 0; w < spec.warmups; ++w)
            run_mechanism(batch, config, weights, pair.strategy);

        // Widen sub-resolution calls: batch enough calls per measurement that
        // each timed block is well above the clock's granularity.
        std::size_t inner = 1;
        {
            const auto start = Clock::now();
            run_mechanism(batch, config, weights, pair.strategy);
            const double probe = seconds_since(start);
            if (probe < 1e-4)
                inner = std::min<std::size_t>(
                    10000, std::size_t(std::ceil(1e-3 / std::max(probe, 1e-9))));
        }

        std::vector<double> samples;
        samples.reserve(spec.reps);
        double last_checksum = 0.0;
        for (std::size_t r = 0; r < spec.reps; ++r) {
            const auto start = Clock::now();
            for (std::size_t i = 0; i < inner; ++i) {
                const MechanismRun run = run_mechanism(batch, config, weights, pair.strategy);
                last_checksum = checksum(run.outputs);
            }
            samples.push_back(seconds_since(start) / double(inner));
        }
        std::sort(samples.begin(), samples.end());
        const double median = samples[samples.size() / 2];

        BenchPoint pt;
        pt.mechanism = pair.mechanism;
        pt.strategy = pair.strategy;
        pt.seq_len = L;
        pt.median_seconds = median;
        pt.state_bytes =
            state_bytes_for(pair.strategy, L, spec.heads, spec.key_dim, spec.value_dim);
        pt.reps = spec.reps;
        pt.low_confidence = median < 1e-6;
        pt.output_checksum = last_checksum;
        points.push_back(pt);
    }
    return points;
}

}  // namespace

std::size_t state_bytes_for(Strategy strategy, std::size_t seq_len, std::size_t heads,
                            std::size_t key_dim, std::size_t value_dim) {
    if (strategy == Strategy::parallel) return seq_len * seq_len * sizeof(double);
    if (strategy == Strategy::recurrent || strategy == Strategy::chunkwise)
        return heads * key_dim * value_dim * sizeof(double);
    throw std::invalid_argument("state_bytes_for: strategy must be explicit");
}

std::vector<BenchPoint> time_mechanism(const BenchSpec& spec) {
    check_spec(spec);
    std::vector<std::vector<BenchPoint>> per_pair(spec.pairs.size());
    if (spec.threaded && spec.pairs.size() > 1) {
        std::vector<std::thread> workers;
        workers.reserve(spec.pairs.size());
        for (std::size_t i = 0; i < spec.pairs.size(); ++i)
            workers.emplace_back(
                [&, i] { per_pair[i] = run_pair(spec, spec.pairs[i]); });
        for (auto& w : workers) w.join();
    } else {
        for (std::size_t i = 0; i < spec.pairs.size(); ++i)
            per_pair[i] = run_pair(spec, spec.pairs[i]);
    }
    std::vector<BenchPoint> points;
    for (auto& pts : per_pair)
        for (auto& p : pts) points.push_back(p);
    return points;
}

double fit_scaling_exponent(const std::vector<BenchPoint>& points) {
    if (points.size() < 4)
        throw std::invalid_argument("fit_scaling_exponent: need at least 4 points");
    std::size_t lo = points[0].seq_len, hi = points[0].seq_len;
    for (const auto& p : points) {
        if (p.mechanism != points[0].mechanism || p.strategy != points[0].strategy)
            throw std::invalid_argument("fit_scaling_exponent: points mix mechanism pairs");
        if (!(p.median_seconds > 0.0))
            throw std::domain_error("fit_scaling_exponent: non-positive timing");
        lo = std::min(lo, p.seq_len);
        hi = std::max(hi, p.seq_len);
    }
    if (hi < 16 * lo)
        throw std::invalid_argument("fit_scaling_exponent: seq_len span must cover >= 16x");
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += std::log(double(p.seq_len));
        my += std::log(p.median_seconds);
    }
    mx /= double(points.size());
    my /= double(points.size());
    double num = 0.0, den = 0.0;
    for (const auto& p : points) {
        const double dx = std::log(double(p.seq_len)) - mx;
        num += dx * (std::log(p.median_seconds) - my);
        den += dx * dx;
    }
    return num / den;
}

void write_csv(std::ostream& os, const std::vector<BenchPoint>& points) {
    os << "mechanism,strategy,L,median_seconds,state_bytes\n";
    os.precision(17);
    for (const auto& p : points)
        os << to_string(p.mechanism) << ',' << to_string(p.strategy) << ',' << p.seq_len << ','
           << p.median_seconds << ',' << p.state_bytes << '\n';
}

nlohmann::json summary_json(const std::vector<BenchPoint>& points) {
    nlohmann::json pairs = nlohmann::json::array();
    std::vector<std::pair<MechanismKind, Strategy>> seen;
    for (const auto& p : points) {
        const auto key = std::make_pair(p.mechanism, p.strategy);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        std::vector<BenchPoint> group;
        for (const auto& q : points)
            if (q.mechanism == p.mechanism && q.strategy == p.strategy) group.push_back(q);
        nlohmann::json entry;
        entry["mechanism"] = to_string(p.mechanism);
        entry["strategy"] = to_string(p.strategy);
        std::size_t lo = group[0].seq_len, hi = group[0].seq_len;
        for (const auto& q : group) {
            lo = std::min(lo, q.seq_len);
            hi = std::max(hi, q.seq_len);
        }
        if (group.size() >= 4 && hi >= 16 * lo)
            entry["exponent"] = fit_scaling_exponent(group);
        else
            entry["exponent"] = nullptr;
        entry["points"] = nlohmann::json::array();
        for (const auto& q : group)
            entry["points"].push_back({{"L", q.seq_len},
                                       {"median_seconds", q.median_seconds},
                                       {"state_bytes", q.state_bytes},
                                       {"low_confidence", q.low_confidence}});
        pairs.push_back(entry);
    }
    return nlohmann::json{{"pairs", pairs}};
}

}  // namespace sla::bench
