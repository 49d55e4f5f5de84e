#include "tcheby/gp.hpp"

#include "tcheby/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace tcheby {

int FeatureMap::dim() const {
    const int A = vocab.letter_count();
    return kmax >= 2 ? A + A * A : A;
}

Eigen::VectorXd FeatureMap::operator()(const TokenSeq& seq) const {
    const int A = vocab.letter_count();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dim());
    if (seq.empty()) return f;
    for (int t : seq) {
        if (t < 2 || t >= vocab.size()) throw std::invalid_argument("FeatureMap: invalid token");
        f[t - 2] += 1.0;
    }
    f.head(A) /= static_cast<double>(seq.size());
    if (kmax >= 2 && seq.size() >= 2) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            f[A + (seq[i] - 2) * A + (seq[i + 1] - 2)] += 1.0;
        }
        f.tail(A * A) /= static_cast<double>(seq.size() - 1);
    }
    return f;
}

double HyperPriors::log_density(double lengthscale, double signal_var, double mean, double noise_var) const {
    auto log_gamma_pdf = [](double v, double shape, double rate) {
        return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(v) - rate * v;
    };
    const double lx = std::log(lengthscale);
    const double mu = ls_mu();
    double lp = -lx - std::log(ls_sigma0) - 0.5 * std::log(2.0 * M_PI) -
                (lx - mu) * (lx - mu) / (2.0 * ls_sigma0 * ls_sigma0);
    lp += log_gamma_pdf(signal_var, signal_shape, signal_rate);
    lp += -0.5 * std::log(2.0 * M_PI * mean_sd * mean_sd) - mean * mean / (2.0 * mean_sd * mean_sd);
    lp += log_gamma_pdf(noise_var, noise_shape, noise_rate);
    return lp;
}

double matern52(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xp, double ell,
                double signal_var) {
    if (ell <= 0.0) throw std::invalid_argument("matern52: lengthscale must be > 0");
    const double d = (x - xp).norm();
    const double a = std::sqrt(5.0) * d / ell;
    return signal_var * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& X1, const Eigen::Ref<const Eigen::MatrixXd>& X2,
                              double ell, double signal_var) {
    Eigen::MatrixXd K(X1.rows(), X2.rows());
    for (Eigen::Index i = 0; i < X1.rows(); ++i) {
        for (Eigen::Index j = 0; j < X2.rows(); ++j) {
            K(i, j) = matern52(X1.row(i).transpose(), X2.row(j).transpose(), ell, signal_var);
        }
    }
    return K;
}

namespace {

Eigen::MatrixXd pairwise_dist(const Eigen::Ref<const Eigen::MatrixXd>& X) {
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * X * X.transpose();
    return d2.cwiseMax(0.0).cwiseSqrt();
}

// Matern 5/2 on a precomputed distance matrix (unit signal variance).
Eigen::MatrixXd matern_from_dist(const Eigen::MatrixXd& dist, double ell) {
    const Eigen::ArrayXXd a = std::sqrt(5.0) * dist.array() / ell;
    return ((1.0 + a + a.square() / 3.0) * (-a).exp()).matrix();
}

GPModel make_gp_from_dist(const Eigen::MatrixXd& dist, const Eigen::Ref<const Eigen::MatrixXd>& X,
                          const Eigen::Ref<const Eigen::VectorXd>& y, double mean, double ell, double signal_var,
                          double noise_var) {
    GPModel m;
    m.mean = mean;
    m.lengthscale = ell;
    m.signal_var = signal_var;
    m.noise_var = noise_var;
    m.X = X;
    m.y = y;

    const Eigen::MatrixXd K = signal_var * matern_from_dist(dist, ell);
    const double scale = K.diagonal().mean() + noise_var;
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 7; ++attempt) {
        Eigen::MatrixXd Keff = K;
        Keff.diagonal().array() += noise_var + jitter;
        m.chol.compute(Keff);
        if (m.chol.info() == Eigen::Success) {
            m.jitter = jitter;
            m.alpha = m.chol.solve((y.array() - mean).matrix());
            return m;
        }
        jitter = (jitter == 0.0) ? 1e-10 * scale : jitter * 10.0;
    }
    throw std::runtime_error("make_gp: Cholesky failed after max jitter");
}

}  // namespace

GPModel make_gp(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y, double mean,
                double ell, double signal_var, double noise_var) {
    if (X.rows() != y.size()) throw std::invalid_argument("make_gp: X/y size mismatch");
    if (signal_var <= 0.0 || noise_var < 0.0) throw std::invalid_argument("make_gp: bad variance");
    return make_gp_from_dist(pairwise_dist(X), X, y, mean, ell, signal_var, noise_var);
}

double log_posterior_density(const GPModel& model, const HyperPriors& priors) {
    const Eigen::Index n = model.y.size();
    const Eigen::VectorXd r = (model.y.array() - model.mean).matrix();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(model.chol.matrixL()(i, i));
    const double lml =
        -0.5 * r.dot(model.alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    return lml + priors.log_density(model.lengthscale, model.signal_var, model.mean, model.noise_var);
}

namespace {

Eigen::Vector4d log_posterior_grad_impl(const GPModel& model, const HyperPriors& priors,
                                        const Eigen::MatrixXd& dist) {
    const Eigen::Index n = model.y.size();
    const Eigen::MatrixXd Kinv = model.chol.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::VectorXd& a = model.alpha;
    const Eigen::MatrixXd aat_minus_kinv = a * a.transpose() - Kinv;

    const Eigen::ArrayXXd s = std::sqrt(5.0) * dist.array() / model.lengthscale;
    const Eigen::ArrayXXd es = (-s).exp();
    const Eigen::ArrayXXd Km = (1.0 + s + s.square() / 3.0) * es;
    // dK/d(log l): per entry sigma_f^2 * (s^2 (1+s)/3) e^{-s}
    const Eigen::ArrayXXd dK_dlogl = model.signal_var * (s.square() * (1.0 + s) / 3.0) * es;

    Eigen::Vector4d g;
    g[0] = 0.5 * (aat_minus_kinv.array() * dK_dlogl).sum();
    g[1] = 0.5 * model.signal_var * (aat_minus_kinv.array() * Km).sum();
    g[2] = a.sum();
    g[3] = 0.5 * model.noise_var * aat_minus_kinv.trace();

    // prior terms in the same coordinates
    const double lx = std::log(model.lengthscale);
    g[0] += -1.0 - (lx - priors.ls_mu()) / (priors.ls_sigma0 * priors.ls_sigma0);
    g[1] += (priors.signal_shape - 1.0) - priors.signal_rate * model.signal_var;
    g[2] += -model.mean / (priors.mean_sd * priors.mean_sd);
    g[3] += (priors.noise_shape - 1.0) - priors.noise_rate * model.noise_var;
    return g;
}

}  // namespace

Eigen::Vector4d log_posterior_grad(const GPModel& model, const HyperPriors& priors) {
    return log_posterior_grad_impl(model, priors, pairwise_dist(model.X));
}

LbfgsResult lbfgs_minimize(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x0, int max_iters, double grad_tol) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = x0;
    Eigen::VectorXd g(n);
    double fx = f(x, g);
    if (!std::isfinite(fx)) throw std::runtime_error("lbfgs: objective not finite at the initial point");

    const int memory = 8;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    LbfgsResult res;
    int it = 0;
    for (; it < max_iters; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < grad_tol) break;

        // two-loop recursion
        Eigen::VectorXd q = g;
        std::vector<double> alpha_buf(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha_buf[static_cast<std::size_t>(i)] =
                rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
            q -= alpha_buf[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha_buf[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        if (dir.dot(g) >= 0.0) dir = -g;  // fall back to steepest descent

        // Armijo backtracking
        double step = 1.0;
        const double slope = dir.dot(g);
        Eigen::VectorXd x_new(n), g_new(n);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + step * dir;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = x_new;
        g = g_new;
        fx = f_new;
    }
    res.x = x;
    res.fx = fx;
    res.iterations = it;
    return res;
}

GPModel fit_map(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                const HyperPriors& priors, int restarts, Rng& rng) {
    if (y.size() < 2) throw std::invalid_argument("fit_map: need at least two observations");
    if (restarts < 1) throw std::invalid_argument("fit_map: need at least one restart");

    const Eigen::MatrixXd dist = pairwise_dist(X);
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
        grad.resize(4);
        try {
            const GPModel m = make_gp_from_dist(dist, X, y, x[2], std::exp(x[0]), std::exp(x[1]), std::exp(x[3]));
            grad = -log_posterior_grad_impl(m, priors, dist);
            return -log_posterior_density(m, priors);
        } catch (const std::exception&) {
            grad.setZero();
            return std::numeric_limits<double>::infinity();
        }
    };

    // data-informed start, then prior draws
    const double y_mean = y.mean();
    const double y_var = std::max(1e-8, (y.array() - y_mean).square().mean());
    std::vector<Eigen::Vector4d> inits;
    inits.emplace_back(priors.ls_mu(), std::log(std::max(1e-8, y_var)), y_mean, std::log(0.1 * y_var + 1e-8));
    for (int r = 1; r < restarts; ++r) {
        Eigen::Vector4d x0;
        x0[0] = priors.ls_mu() + priors.ls_sigma0 * rng.normal();
        x0[1] = std::log(rng.gamma(priors.signal_shape, priors.signal_rate));
        x0[2] = priors.mean_sd * rng.normal();
        x0[3] = std::log(rng.gamma(priors.noise_shape, priors.noise_rate));
        inits.push_back(x0);
    }

    bool any = false;
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;
    std::string last_error = "no restart converged";
    for (const auto& x0 : inits) {
        try {
            const LbfgsResult r = lbfgs_minimize(objective, x0, 60, 1e-6);
            if (!std::isfinite(r.fx)) continue;
            any = true;
            if (r.fx < best) {
                best = r.fx;
                best_x = r.x;
            }
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!any) throw std::runtime_error(std::string("fit_map: all restarts failed: ") + last_error);
    return make_gp(X, y, best_x[2], std::exp(best_x[0]), std::exp(best_x[1]), std::exp(best_x[3]));
}

void posterior(const GPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& Xq, Eigen::VectorXd& mean_out,
               Eigen::MatrixXd& cov_out) {
    const Eigen::MatrixXd Ks = kernel_matrix(model.X, Xq, model.lengthscale, model.signal_var);  // n x q
    const Eigen::MatrixXd Kss = kernel_matrix(Xq, Xq, model.lengthscale, model.signal_var);
    mean_out = Eigen::VectorXd::Constant(Xq.rows(), model.mean) + Ks.transpose() * model.alpha;
    const Eigen::MatrixXd v = model.chol.solve(Ks);
    cov_out = Kss - Ks.transpose() * v;
    cov_out = 0.5 * (cov_out + cov_out.transpose()).eval();
}

namespace {

std::vector<int> first_primes(int count) {
    std::vector<int> primes;
    primes.reserve(static_cast<std::size_t>(count));
    for (int cand = 2; static_cast<int>(primes.size()) < count; ++cand) {
        bool is_prime = true;
        for (int p : primes) {
            if (p * p > cand) break;
            if (cand % p == 0) {
                is_prime = false;
                break;
            }
        }
        if (is_prime) primes.push_back(cand);
    }
    return primes;
}

// Cholesky of a covariance block with an escalating jitter ladder. The floor
// is absolute so the degenerate zero-variance posterior still factorizes.
Eigen::MatrixXd chol_with_jitter(const Eigen::MatrixXd& cov) {
    const double scale = std::max(cov.diagonal().mean(), 0.0);
    double jitter = std::max(1e-10 * scale, 1e-12);
    for (int attempt = 0; attempt < 10; ++attempt) {
        Eigen::MatrixXd c = cov;
        c.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() == Eigen::Success) return llt.matrixL();
        jitter *= 10.0;
    }
    throw std::runtime_error("expected_hypervolume: covariance factorization failed");
}

}  // namespace

HaltonSampler::HaltonSampler(int dim, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("HaltonSampler: dim must be >= 1");
    bases_ = first_primes(dim);
    multipliers_.resize(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
        multipliers_[static_cast<std::size_t>(d)] = 1 + rng.uniform_int(bases_[static_cast<std::size_t>(d)] - 1);
    }
}

Eigen::VectorXd HaltonSampler::point(int index) const {
    const int dim = static_cast<int>(bases_.size());
    Eigen::VectorXd u(dim);
    for (int d = 0; d < dim; ++d) {
        const int b = bases_[static_cast<std::size_t>(d)];
        const long long f = multipliers_[static_cast<std::size_t>(d)];
        long long i = index + 1;  // skip the origin
        double inv = 1.0 / b;
        double x = 0.0;
        while (i > 0) {
            const long long digit = i % b;
            x += static_cast<double>((f * digit) % b) * inv;
            i /= b;
            inv /= b;
        }
        u[d] = x > 0.0 ? x : 0.5 / b;  // keep strictly inside (0,1)
    }
    return u;
}

std::vector<EhvRow> expected_hypervolume(const std::vector<GPModel>& models,
                                         const std::vector<Eigen::VectorXd>& candidate_features,
                                         const EhvOptions& opts, const Eigen::VectorXd& reference, Rng& rng) {
    const int n_obj = static_cast<int>(models.size());
    const int pool = static_cast<int>(candidate_features.size());
    if (n_obj < 2 || n_obj > 3) throw std::invalid_argument("expected_hypervolume: supports 2 or 3 objectives");
    if (pool < 1) throw std::invalid_argument("expected_hypervolume: empty candidate pool");
    if (opts.n_qmc < 2) throw std::invalid_argument("expected_hypervolume: n_qmc must be >= 2");
    if (reference.size() != n_obj) throw std::invalid_argument("expected_hypervolume: reference dimension mismatch");

    Eigen::MatrixXd Xq(pool, candidate_features.front().size());
    for (int i = 0; i < pool; ++i) Xq.row(i) = candidate_features[static_cast<std::size_t>(i)].transpose();

    // joint posterior over the whole pool, sliced per repeat
    std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(n_obj));
    std::vector<Eigen::MatrixXd> covs(static_cast<std::size_t>(n_obj));
    for (int o = 0; o < n_obj; ++o)
        posterior(models[static_cast<std::size_t>(o)], Xq, means[static_cast<std::size_t>(o)],
                  covs[static_cast<std::size_t>(o)]);

    std::vector<EhvRow> out;
    for (int k : opts.subset_sizes) {
        if (k < 1 || k > pool)
            throw std::invalid_argument("expected_hypervolume: subset size " + std::to_string(k) +
                                        " exceeds candidate pool " + std::to_string(pool));
        std::vector<double> repeat_values(static_cast<std::size_t>(opts.n_repeats));
        const Rng base = rng.split(0xE000 + static_cast<std::uint64_t>(k));

        parallel_for(opts.n_repeats, [&](int rep) {
            Rng r = base.split(static_cast<std::uint64_t>(rep));
            // k distinct candidates, uniform
            std::vector<int> idx(static_cast<std::size_t>(pool));
            for (int i = 0; i < pool; ++i) idx[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < k; ++i) std::swap(idx[static_cast<std::size_t>(i)],
                                                  idx[static_cast<std::size_t>(i + r.uniform_int(pool - i))]);
            idx.resize(static_cast<std::size_t>(k));

            std::vector<Eigen::VectorXd> mu(static_cast<std::size_t>(n_obj));
            std::vector<Eigen::MatrixXd> L(static_cast<std::size_t>(n_obj));
            for (int o = 0; o < n_obj; ++o) {
                Eigen::VectorXd m(k);
                Eigen::MatrixXd c(k, k);
                for (int i = 0; i < k; ++i) {
                    m[i] = means[static_cast<std::size_t>(o)][idx[static_cast<std::size_t>(i)]];
                    for (int j = 0; j < k; ++j)
                        c(i, j) = covs[static_cast<std::size_t>(o)](idx[static_cast<std::size_t>(i)],
                                                                    idx[static_cast<std::size_t>(j)]);
                }
                mu[static_cast<std::size_t>(o)] = std::move(m);
                L[static_cast<std::size_t>(o)] = chol_with_jitter(c);
            }

            HaltonSampler qmc(k * n_obj, r);
            double acc = 0.0;
            std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(k), Eigen::VectorXd(n_obj));
            for (int s = 0; s < opts.n_qmc; ++s) {
                const Eigen::VectorXd u = qmc.point(s);
                for (int o = 0; o < n_obj; ++o) {
                    Eigen::VectorXd z(k);
                    for (int i = 0; i < k; ++i) z[i] = inv_normal_cdf(u[o * k + i]);
                    const Eigen::VectorXd smp = mu[static_cast<std::size_t>(o)] + L[static_cast<std::size_t>(o)] * z;
                    for (int i = 0; i < k; ++i) pts[static_cast<std::size_t>(i)][o] = smp[i];
                }
                acc += hypervolume(pts, reference);
            }
            repeat_values[static_cast<std::size_t>(rep)] = acc / opts.n_qmc;
        });

        double mean = 0.0;
        for (double v : repeat_values) mean += v;
        mean /= opts.n_repeats;
        double var = 0.0;
        for (double v : repeat_values) var += (v - mean) * (v - mean);
        const double sd = opts.n_repeats > 1 ? std::sqrt(var / (opts.n_repeats - 1)) : 0.0;
        out.push_back({k, mean, sd});
    }
    return out;
}

}  // namespace tcheby
