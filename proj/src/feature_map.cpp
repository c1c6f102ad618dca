#include "sla/feature_map.hpp"

#include <cmath>
#include <stdexcept>

namespace sla {

std::string to_string(FeatureMapKind kind) {
    switch (kind) {
        case FeatureMapKind::identity: return "identity";
        case FeatureMapKind::relu: return "relu";
        case FeatureMapKind::one_plus_elu: return "one-plus-elu";
        case FeatureMapKind::silu: return "silu";
    }
    throw std::logic_error("to_string: unknown feature map kind");
}

FeatureMapKind feature_map_from_string(std::string_view name) {
    if (name == "identity") return FeatureMapKind::identity;
    if (name == "relu") return FeatureMapKind::relu;
    if (name == "one-plus-elu") return FeatureMapKind::one_plus_elu;
    if (name == "silu") return FeatureMapKind::silu;
    throw std::invalid_argument("unknown feature map: " + std::string(name));
}

bool positively_homogeneous(FeatureMapKind kind) {
    return kind == FeatureMapKind::identity || kind == FeatureMapKind::relu;
}

double apply_feature(double x, FeatureMapKind kind) {
    switch (kind) {
        case FeatureMapKind::identity: return x;
        case FeatureMapKind::relu: return x > 0.0 ? x : 0.0;
        case FeatureMapKind::one_plus_elu: return x > 0.0 ? 1.0 + x : std::exp(x);
        case FeatureMapKind::silu: return x * sigmoid(x);
    }
    throw std::logic_error("apply_feature: unknown feature map kind");
}

double feature_derivative(double x, FeatureMapKind kind) {
    switch (kind) {
        case FeatureMapKind::identity: return 1.0;
        case FeatureMapKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case FeatureMapKind::one_plus_elu: return x > 0.0 ? 1.0 : std::exp(x);
        case FeatureMapKind::silu: {
            const double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        }
    }
    throw std::logic_error("feature_derivative: unknown feature map kind");
}

Matrix feature_map(const Matrix& m, FeatureMapKind kind) {
    if (!m.is_finite()) throw std::domain_error("feature_map: non-finite input");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = apply_feature(m.data()[i], kind);
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace sla
