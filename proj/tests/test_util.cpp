#include "tcheby/util.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace tcheby;

TEST_CASE("logsumexp matches long-double brute force") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd x(1 + rng.uniform_int(6));
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 40.0 * (rng.uniform() - 0.5);
        long double acc = 0.0L;
        for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::exp(static_cast<long double>(x[i]));
        const double expected = static_cast<double>(std::log(acc));
        CHECK(logsumexp(x) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("logsumexp survives large magnitudes") {
    Eigen::VectorXd x(3);
    x << 900.0, 899.0, -1000.0;
    CHECK(logsumexp(x) == doctest::Approx(900.0 + std::log1p(std::exp(-1.0))).epsilon(1e-14));
}

TEST_CASE("softmax of equal inputs is exactly uniform") {
    for (int n : {2, 3, 7}) {
        const Eigen::VectorXd w = softmax(Eigen::VectorXd::Constant(n, 3.7));
        for (int i = 0; i < n; ++i) CHECK(w[i] == 1.0 / n);
    }
}

TEST_CASE("sigmoid identities") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(-log_sigmoid(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(-log_sigmoid(10.0) == doctest::Approx(4.5398899216870535e-05).epsilon(1e-10));
    CHECK(log_sigmoid(-40.0) == doctest::Approx(-40.0).epsilon(1e-12));
}

TEST_CASE("inv_normal_cdf inverts the normal CDF") {
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-6}) {
        const double x = inv_normal_cdf(p);
        CHECK(cdf(x) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK_THROWS(inv_normal_cdf(0.0));
}

TEST_CASE("rng determinism and splits") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    Rng c(42);
    Rng s1 = c.split(1), s2 = c.split(2);
    CHECK(s1.uniform() != s2.uniform());

    // uniform_int stays in range and hits every value
    Rng d(3);
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) {
        const int v = d.uniform_int(5);
        CHECK(v >= 0);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("rng normal moments") {
    Rng rng(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(std::abs(s / n) < 0.02);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng gamma moments") {
    Rng rng(13);
    const double shape = 5.0, rate = 5.0;
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rng.gamma(shape, rate);
    CHECK(s / n == doctest::Approx(shape / rate).epsilon(0.03));
}

TEST_CASE("parallel_for fills every slot once") {
    std::vector<int> out(1000, 0);
    parallel_for(1000, [&](int i) { out[static_cast<std::size_t>(i)] = i * i; });
    for (int i = 0; i < 1000; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * i);
}
