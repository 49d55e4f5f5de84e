#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcheby {

inline constexpr const char* kVersion = "0.1.0";

// splitmix64, used to derive independent RNG streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG wrapper. All draws go through hand-rolled transforms so
// results are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        // rejection sampling, no modulo bias
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / un * un;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return static_cast<int>(v % un);
    }

    // standard normal via Marsaglia polar method
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Gamma(shape, rate) via Marsaglia-Tsang; shape may be < 1.
    double gamma(double shape, double rate) {
        if (shape <= 0.0 || rate <= 0.0) throw std::invalid_argument("gamma: invalid parameters");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    // Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[static_cast<std::size_t>(uniform_int(i + 1))]);
        }
    }

    // Independent child stream; `tag` distinguishes streams from one parent.
    Rng split(std::uint64_t tag) const { return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x51ed2701a1b2c3d4ULL))); }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Max-shifted logsumexp with extended-precision accumulation.
inline double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() == 0) return -std::numeric_limits<double>::infinity();
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::exp(static_cast<long double>(x[i] - m));
    return m + static_cast<double>(std::log(acc));
}

// softmax computed so that equal inputs give exactly 1/n weights
inline Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& x) {
    Eigen::VectorXd w(x.size());
    const double m = x.maxCoeff();
    for (Eigen::Index i = 0; i < x.size(); ++i) w[i] = std::exp(x[i] - m);
    w /= w.sum();
    return w;
}

inline double log_sigmoid(double z) {
    // -softplus(-z), stable for both tails
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Inverse standard normal CDF (Acklam's rational approximation, one Halley
// refinement with erfc brings it to near machine precision).
double inv_normal_cdf(double p);

// Number of worker threads: TCHEBY_THREADS if set, else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) across workers. Each index writes only its own
// output slot, so results do not depend on the schedule.
void parallel_for(int n, const std::function<void(int)>& fn);

// printf-style %.17g formatting (shortest round-trip not required, stable output is)
std::string fmt_g(double v);

}  // namespace tcheby
