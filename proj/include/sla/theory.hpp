#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "sla/feature_map.hpp"

namespace sla::theory {

// Ties and vanishing denominators are reported separately from malformed
// input so callers can distinguish "no unique winner" from "bad arguments".
struct DegenerateInput : std::domain_error {
    using std::domain_error::domain_error;
};

// {0, 0.25, 0.5, 1, 2, 4, ..., 1024}
std::vector<double> default_lambda_grid();

// Linear-attention read weights over stored keys, normalized to sum to 1:
// w_j = <phi(q), phi(k_j)> / sum_i <phi(q), phi(k_i)>. Throws DegenerateInput
// when |denominator| < 1e-12.
std::vector<double> normalized_linear_weights(const std::vector<double>& query,
                                              const std::vector<std::vector<double>>& keys,
                                              FeatureMapKind fmap);

// Checks that normalized weights (and, when they form a distribution, their
// entropy) do not move when the query is rescaled by each lambda. Holds
// exactly for positively homogeneous feature maps.
struct InvarianceReport {
    double max_weight_dev = 0.0;
    double max_entropy_dev = 0.0;
    bool entropy_defined = true;  // false when weights have mixed signs
    bool pass = false;
};
InvarianceReport magnitude_invariance_check(const std::vector<double>& query,
                                            const std::vector<std::vector<double>>& keys,
                                            FeatureMapKind fmap,
                                            const std::vector<double>& lambdas,
                                            double tol = 1e-12);

// Sharpness sweep: entropy of softmax(lambda * s) for the read and write
// scores plus the head-coincidence coefficient at every lambda.
struct SweepEntry {
    double lambda;
    double entropy_q;
    double entropy_k;
    double c_lambda;
};

enum class LimitVerdict { pass, fail, degenerate };

struct SweepReport {
    std::vector<SweepEntry> entries;      // ascending lambda
    bool entropy_q_monotone = false;      // non-increasing within 1e-12 slack
    bool entropy_k_monotone = false;
    LimitVerdict limit_q = LimitVerdict::fail;  // largest-lambda gate vs one_hot(argmax), 1e-6
    LimitVerdict limit_k = LimitVerdict::fail;

    bool pass() const;
    // columns: lambda,entropy_q,entropy_k,c_lambda
    void write_csv(std::ostream& os) const;
};

SweepReport gate_entropy_sweep(const std::vector<double>& scores_q,
                               const std::vector<double>& scores_k,
                               const std::vector<double>& lambdas);

// C(lambda) = sum_h softmax(lambda s_q)_h softmax(lambda s_k)_h, the joint
// head-coincidence weight of the read and write gates. lambda must be >= 0.
double wta_coefficient(const std::vector<double>& scores_q,
                       const std::vector<double>& scores_k, double lambda);

// Large-lambda limit: C -> 1 when the score argmaxes agree and -> 0 when they
// differ. Tied maxima (gap < 1e-12) raise DegenerateInput. pass uses a 1e-6
// tolerance, which holds for lambda_max >= 1e3 and score gaps >= 0.1.
struct WtaVerdict {
    double target = 0.0;
    double achieved = 0.0;
    bool pass = false;
};
WtaVerdict wta_limit_check(const std::vector<double>& scores_q,
                           const std::vector<double>& scores_k, double lambda_max);

}  // namespace sla::theory
