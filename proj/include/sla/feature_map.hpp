#pragma once

#include <string>
#include <string_view>

#include "sla/matrix.hpp"

namespace sla {

enum class FeatureMapKind { identity, relu, one_plus_elu, silu };

std::string to_string(FeatureMapKind kind);
FeatureMapKind feature_map_from_string(std::string_view name);

// identity and relu are positively homogeneous: phi(c x) = c phi(x) for c > 0.
bool positively_homogeneous(FeatureMapKind kind);

double apply_feature(double x, FeatureMapKind kind);
// Pointwise derivative; relu uses the 0 subgradient at the kink.
double feature_derivative(double x, FeatureMapKind kind);

// Elementwise map. Throws std::domain_error on non-finite input.
Matrix feature_map(const Matrix& m, FeatureMapKind kind);

// Numerically stable logistic, used by the data-dependent gate sources.
double sigmoid(double x);

}  // namespace sla
