#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sla/feature_map.hpp"
#include "sla/matrix.hpp"
#include "sla/rng.hpp"

using namespace sla;

TEST_CASE("matrix construction and access") {
    Matrix m(2, 3, 1.5);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 1.5);
    m(0, 1) = -4.0;
    CHECK(m(0, 1) == -4.0);

    const Matrix id = Matrix::identity(3);
    CHECK(id(0, 0) == 1.0);
    CHECK(id(0, 1) == 0.0);

    const Matrix f = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(f(1, 0) == 3.0);
    CHECK_THROWS_AS(Matrix::from_rows({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("matrix arithmetic and matmul") {
    const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Matrix b = Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}});
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 19.0);
    CHECK(c(0, 1) == 22.0);
    CHECK(c(1, 0) == 43.0);
    CHECK(c(1, 1) == 50.0);

    const Matrix s = a + b;
    CHECK(s(0, 0) == 6.0);
    const Matrix d = b - a;
    CHECK(d(1, 1) == 4.0);
    const Matrix t = a.transposed();
    CHECK(t(0, 1) == 3.0);
    CHECK(max_abs(a) == 4.0);
    CHECK(max_abs_diff(a, b) == 4.0);

    CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), std::invalid_argument);
    Matrix bad = a;
    CHECK_THROWS_AS(bad += Matrix(3, 3), std::invalid_argument);
    CHECK_THROWS_AS(max_abs_diff(a, Matrix(1, 2)), std::invalid_argument);

    const std::vector<double> u = {1.0, 2.0, 3.0};
    const std::vector<double> v = {4.0, 5.0, 6.0};
    CHECK(dot(std::span<const double>(u), std::span<const double>(v)) == 32.0);
}

TEST_CASE("softmax matches the closed form on [1, 0.5]") {
    // 1/(1+exp(-0.5)) and its complement, evaluated independently
    const Matrix g = softmax_rows(Matrix::from_rows({{1.0, 0.5}}));
    CHECK(g(0, 0) == doctest::Approx(0.62245933120185459).epsilon(1e-15));
    CHECK(g(0, 1) == doctest::Approx(0.37754066879814546).epsilon(1e-15));
    CHECK(g(0, 0) + g(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("softmax temperature divides the logits") {
    const Matrix m = Matrix::from_rows({{2.0, -1.0, 0.5}});
    const Matrix half = softmax_rows(m, 2.0);
    Matrix scaled = m;
    scaled *= 0.5;
    const Matrix direct = softmax_rows(scaled);
    CHECK(max_abs_diff(half, direct) <= 1e-15);
}

TEST_CASE("softmax rows sum to 1 across extreme magnitudes") {
    Rng rng(42);
    Matrix m(16, 8);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-700.0, 700.0);
    const Matrix g = softmax_rows(m);
    CHECK(g.is_finite());
    for (std::size_t r = 0; r < g.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) {
            sum += g(r, c);
            CHECK(g(r, c) >= 0.0);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax argument validation") {
    const Matrix m = Matrix::from_rows({{1.0, 2.0}});
    CHECK_THROWS_AS(softmax_rows(m, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_rows(m, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_rows(m, std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
    Matrix bad = m;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(softmax_rows(bad), std::domain_error);
}

TEST_CASE("entropy matches hand values") {
    CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
    // softmax([0.5, 0]) entropy, evaluated from the closed form
    CHECK(entropy(std::vector<double>{0.62245933120185459, 0.37754066879814546}) ==
          doctest::Approx(0.66284731857917945).epsilon(1e-14));
}

TEST_CASE("entropy is maximized by the uniform distribution") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.next_u64() % 7;
        std::vector<double> p(n);
        double sum = 0.0;
        for (double& x : p) sum += (x = rng.uniform(0.01, 1.0));
        for (double& x : p) x /= sum;
        CHECK(entropy(p) <= std::log(double(n)) + 1e-12);
    }
}

TEST_CASE("entropy rejects non-distributions") {
    CHECK_THROWS_AS(entropy(std::vector<double>{0.5, 0.6}), std::domain_error);
    CHECK_THROWS_AS(entropy(std::vector<double>{1.2, -0.2}), std::domain_error);
    CHECK_THROWS_AS(entropy(std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 1.0}),
                    std::domain_error);
}

TEST_CASE("feature map values") {
    CHECK(apply_feature(-3.0, FeatureMapKind::identity) == -3.0);
    CHECK(apply_feature(-3.0, FeatureMapKind::relu) == 0.0);
    CHECK(apply_feature(2.0, FeatureMapKind::relu) == 2.0);
    CHECK(apply_feature(0.0, FeatureMapKind::silu) == 0.0);
    CHECK(apply_feature(1.0, FeatureMapKind::one_plus_elu) == 2.0);
    CHECK(apply_feature(-1.0, FeatureMapKind::one_plus_elu) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(apply_feature(3.0, FeatureMapKind::silu) ==
          doctest::Approx(3.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
    // one-plus-elu stays strictly positive even far negative
    CHECK(apply_feature(-40.0, FeatureMapKind::one_plus_elu) > 0.0);
}

TEST_CASE("identity and relu are exactly positively homogeneous") {
    CHECK(positively_homogeneous(FeatureMapKind::identity));
    CHECK(positively_homogeneous(FeatureMapKind::relu));
    CHECK_FALSE(positively_homogeneous(FeatureMapKind::one_plus_elu));
    CHECK_FALSE(positively_homogeneous(FeatureMapKind::silu));
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const double x = rng.uniform(-5.0, 5.0);
        // scaling by a power of two is exact in binary floating point
        CHECK(apply_feature(4.0 * x, FeatureMapKind::identity) ==
              4.0 * apply_feature(x, FeatureMapKind::identity));
        CHECK(apply_feature(4.0 * x, FeatureMapKind::relu) ==
              4.0 * apply_feature(x, FeatureMapKind::relu));
    }
}

TEST_CASE("feature derivatives agree with finite differences away from kinks") {
    Rng rng(11);
    for (const auto kind : {FeatureMapKind::identity, FeatureMapKind::relu,
                            FeatureMapKind::one_plus_elu, FeatureMapKind::silu}) {
        for (int rep = 0; rep < 30; ++rep) {
            double x = rng.uniform(-4.0, 4.0);
            if (kind == FeatureMapKind::relu && std::abs(x) < 0.01) x += 0.5;
            const double h = 1e-6;
            const double fd =
                (apply_feature(x + h, kind) - apply_feature(x - h, kind)) / (2.0 * h);
            CHECK(feature_derivative(x, kind) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("feature map names round trip and bad names throw") {
    for (const auto kind : {FeatureMapKind::identity, FeatureMapKind::relu,
                            FeatureMapKind::one_plus_elu, FeatureMapKind::silu})
        CHECK(feature_map_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(feature_map_from_string("elu"), std::invalid_argument);
    Matrix bad(1, 1, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(feature_map(bad, FeatureMapKind::relu), std::domain_error);
}

TEST_CASE("sigmoid is stable at extreme inputs") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(sigmoid(3.0) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
    CHECK(sigmoid(-3.0) + sigmoid(3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rng reproduces the reference stream") {
    // frozen outputs of the canonical splitmix64-seeded xoshiro256**
    Rng r(42);
    CHECK(r.next_u64() == 1546998764402558742ULL);
    CHECK(r.next_u64() == 6990951692964543102ULL);
    CHECK(r.next_u64() == 12544586762248559009ULL);
    Rng d(42);
    CHECK(d.next_double() == 0.083862971059882163);
    CHECK(d.next_double() == 0.37898025066266861);
    CHECK(d.next_double() == 0.68004341102813937);
    Rng z(0);
    CHECK(z.next_u64() == 11091344671253066420ULL);
}

TEST_CASE("rng determinism and ranges") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(9);
    for (int i = 0; i < 200; ++i) {
        const double x = r.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        const double u = r.uniform(-2.5, 4.0);
        CHECK(u >= -2.5);
        CHECK(u < 4.0);
    }
}

TEST_CASE("random_matrix shape, range and validation") {
    Rng rng(5);
    const Matrix m = random_matrix(rng, 4, 6, 2.0);
    CHECK(m.rows() == 4);
    CHECK(m.cols() == 6);
    CHECK(max_abs(m) <= 2.0);
    Rng rng2(5);
    const Matrix z = random_matrix(rng2, 3, 3, 0.0);
    CHECK(max_abs(z) == 0.0);
    CHECK_THROWS_AS(random_matrix(rng, 0, 3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(random_matrix(rng, 3, 3, -1.0), std::invalid_argument);
}
