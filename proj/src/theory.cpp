#include "sla/theory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sla/matrix.hpp"

namespace sla::theory {

namespace {

constexpr double kTieGap = 1e-12;
constexpr double kMonotoneSlack = 1e-12;
constexpr double kLimitTol = 1e-6;

void check_scores(const std::vector<double>& s, const char* which) {
    if (s.empty()) throw std::invalid_argument(std::string(which) + ": empty score vector");
    for (double v : s)
        if (!std::isfinite(v))
            throw std::domain_error(std::string(which) + ": non-finite scores");
}

std::vector<double> softmax_vec(const std::vector<double>& s, double lambda) {
    Matrix row(1, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) row(0, i) = lambda * s[i];
    const Matrix g = softmax_rows(row);
    return {g.data().begin(), g.data().end()};
}

// Index of the strict maximum; nullopt-like -1 when the top two entries are
// within the tie gap.
long unique_argmax(const std::vector<double>& s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[best]) best = i;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != best && s[best] - s[i] < kTieGap) return -1;
    return long(best);
}

LimitVerdict limit_verdict(const std::vector<double>& scores, double lambda_max) {
    const long arg = unique_argmax(scores);
    if (arg < 0) return LimitVerdict::degenerate;
    const std::vector<double> g = softmax_vec(scores, lambda_max);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        dev = std::max(dev, std::abs(g[i] - (long(i) == arg ? 1.0 : 0.0)));
    return dev <= kLimitTol ? LimitVerdict::pass : LimitVerdict::fail;
}

}  // namespace

std::vector<double> default_lambda_grid() {
    std::vector<double> grid = {0.0, 0.25, 0.5};
    for (double l = 1.0; l <= 1024.0; l *= 2.0) grid.push_back(l);
    return grid;
}

std::vector<double> normalized_linear_weights(const std::vector<double>& query,
                                              const std::vector<std::vector<double>>& keys,
                                              FeatureMapKind fmap) {
    if (query.empty()) throw std::invalid_argument("normalized_linear_weights: empty query");
    if (keys.empty()) throw std::invalid_argument("normalized_linear_weights: no keys");
    std::vector<double> phi_q(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) phi_q[i] = apply_feature(query[i], fmap);
    std::vector<double> w(keys.size());
    double denom = 0.0;
    for (std::size_t j = 0; j < keys.size(); ++j) {
        if (keys[j].size() != query.size())
            throw std::invalid_argument("normalized_linear_weights: key length mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i)
            s += phi_q[i] * apply_feature(keys[j][i], fmap);
        w[j] = s;
        denom += s;
    }
    if (std::abs(denom) < 1e-12)
        throw DegenerateInput("normalized_linear_weights: weight mass vanishes");
    for (double& v : w) v /= denom;
    return w;
}

InvarianceReport magnitude_invariance_check(const std::vector<double>& query,
                                            const std::vector<std::vector<double>>& keys,
                                            FeatureMapKind fmap,
                                            const std::vector<double>& lambdas,
                                            double tol) {
    if (lambdas.empty())
        throw std::invalid_argument("magnitude_invariance_check: empty lambda list");
    for (double l : lambdas)
        if (!(l > 0.0))
            throw std::invalid_argument("magnitude_invariance_check: lambdas must be > 0");

    const std::vector<double> base = normalized_linear_weights(query, keys, fmap);
    const bool nonneg = std::all_of(base.begin(), base.end(), [](double v) { return v >= 0.0; });
    InvarianceReport report;
    report.entropy_defined = nonneg;
    const double base_entropy = nonneg ? entropy(base) : 0.0;

    std::vector<double> scaled_query(query.size());
    for (double l : lambdas) {
        for (std::size_t i = 0; i < query.size(); ++i) scaled_query[i] = l * query[i];
        const std::vector<double> w = normalized_linear_weights(scaled_query, keys, fmap);
        for (std::size_t j = 0; j < w.size(); ++j)
            report.max_weight_dev = std::max(report.max_weight_dev, std::abs(w[j] - base[j]));
        if (nonneg) {
            const bool w_nonneg =
                std::all_of(w.begin(), w.end(), [](double v) { return v >= 0.0; });
            if (w_nonneg)
                report.max_entropy_dev =
                    std::max(report.max_entropy_dev, std::abs(entropy(w) - base_entropy));
            else
                report.entropy_defined = false;
        }
    }
    report.pass = report.max_weight_dev <= tol &&
                  (!report.entropy_defined || report.max_entropy_dev <= tol);
    return report;
}

bool SweepReport::pass() const {
    return entropy_q_monotone && entropy_k_monotone && limit_q == LimitVerdict::pass &&
           limit_k == LimitVerdict::pass;
}

void SweepReport::write_csv(std::ostream& os) const {
    os << "lambda,entropy_q,entropy_k,c_lambda\n";
    os.precision(17);
    for (const auto& e : entries)
        os << e.lambda << ',' << e.entropy_q << ',' << e.entropy_k << ',' << e.c_lambda << '\n';
}

SweepReport gate_entropy_sweep(const std::vector<double>& scores_q,
                               const std::vector<double>& scores_k,
                               const std::vector<double>& lambdas) {
    check_scores(scores_q, "gate_entropy_sweep scores_q");
    check_scores(scores_k, "gate_entropy_sweep scores_k");
    if (scores_q.size() != scores_k.size())
        throw std::invalid_argument("gate_entropy_sweep: score vectors must have equal length");
    if (lambdas.empty()) throw std::invalid_argument("gate_entropy_sweep: empty lambda grid");
    for (double l : lambdas)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw std::invalid_argument("gate_entropy_sweep: lambdas must be finite and >= 0");

    std::vector<double> grid = lambdas;
    std::sort(grid.begin(), grid.end());

    SweepReport report;
    report.entries.reserve(grid.size());
    for (double l : grid) {
        SweepEntry e;
        e.lambda = l;
        e.entropy_q = entropy(softmax_vec(scores_q, l));
        e.entropy_k = entropy(softmax_vec(scores_k, l));
        e.c_lambda = wta_coefficient(scores_q, scores_k, l);
        report.entries.push_back(e);
    }
    auto monotone = [&](auto field) {
        for (std::size_t i = 1; i < report.entries.size(); ++i)
            if (field(report.entries[i]) > field(report.entries[i - 1]) + kMonotoneSlack)
                return false;
        return true;
    };
    report.entropy_q_monotone = monotone([](const SweepEntry& e) { return e.entropy_q; });
    report.entropy_k_monotone = monotone([](const SweepEntry& e) { return e.entropy_k; });
    report.limit_q = limit_verdict(scores_q, grid.back());
    report.limit_k = limit_verdict(scores_k, grid.back());
    return report;
}

double wta_coefficient(const std::vector<double>& scores_q,
                       const std::vector<double>& scores_k, double lambda) {
    check_scores(scores_q, "wta_coefficient scores_q");
    check_scores(scores_k, "wta_coefficient scores_k");
    if (scores_q.size() != scores_k.size())
        throw std::invalid_argument("wta_coefficient: score vectors must have equal length");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("wta_coefficient: lambda must be finite and >= 0");
    const std::vector<double> gq = softmax_vec(scores_q, lambda);
    const std::vector<double> gk = softmax_vec(scores_k, lambda);
    double c = 0.0;
    for (std::size_t h = 0; h < gq.size(); ++h) c += gq[h] * gk[h];
    return c;
}

WtaVerdict wta_limit_check(const std::vector<double>& scores_q,
                           const std::vector<double>& scores_k, double lambda_max) {
    check_scores(scores_q, "wta_limit_check scores_q");
    check_scores(scores_k, "wta_limit_check scores_k");
    if (scores_q.size() != scores_k.size())
        throw std::invalid_argument("wta_limit_check: score vectors must have equal length");
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max))
        throw std::invalid_argument("wta_limit_check: lambda_max must be finite and >= 0");
    const long aq = unique_argmax(scores_q);
    const long ak = unique_argmax(scores_k);
    if (aq < 0 || ak < 0)
        throw DegenerateInput("wta_limit_check: tied maximum scores have no winner");
    WtaVerdict v;
    v.target = aq == ak ? 1.0 : 0.0;
    v.achieved = wta_coefficient(scores_q, scores_k, lambda_max);
    v.pass = std::abs(v.achieved - v.target) <= kLimitTol;
    return v;
}

}  // namespace sla::theory
