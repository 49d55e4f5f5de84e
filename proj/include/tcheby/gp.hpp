#pragma once

#include "tcheby/util.hpp"
#include "tcheby/vocab.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tcheby {

// Length-normalized unigram+bigram count features; the pluggable stand-in for
// a learned sequence embedding.
struct FeatureMap {
    Vocabulary vocab;
    int kmax = 2;

    int dim() const;
    Eigen::VectorXd operator()(const TokenSeq& seq) const;
};

struct HyperPriors {
    int feature_dim = 1;
    double ls_mu0 = std::sqrt(2.0);  // lengthscale ~ LogNormal(mu0 + log(D)/2, sigma0)
    double ls_sigma0 = std::sqrt(3.0);
    double signal_shape = 5.0;  // signal variance ~ Gamma(shape, rate)
    double signal_rate = 5.0;
    double mean_sd = 3.0;        // mean ~ Normal(0, sd^2)
    double noise_shape = 1.1;    // noise variance ~ Gamma(shape, rate)
    double noise_rate = 0.5;

    double ls_mu() const { return ls_mu0 + 0.5 * std::log(static_cast<double>(feature_dim)); }
    double log_density(double lengthscale, double signal_var, double mean, double noise_var) const;
};

// sigma_f^2 (1 + sqrt(5) d / l + 5 d^2 / (3 l^2)) exp(-sqrt(5) d / l)
double matern52(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xp, double ell,
                double signal_var);

Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& X1, const Eigen::Ref<const Eigen::MatrixXd>& X2,
                              double ell, double signal_var);

struct GPModel {
    double mean = 0.0;
    double lengthscale = 1.0;
    double signal_var = 1.0;
    double noise_var = 0.0;
    Eigen::MatrixXd X;  // n x D
    Eigen::VectorXd y;  // n
    double jitter = 0.0;

    Eigen::LLT<Eigen::MatrixXd> chol;  // of signal_var*Km + (noise_var + jitter)*I
    Eigen::VectorXd alpha;             // chol solve of (y - mean)
};

// Factorizes the kernel matrix, escalating jitter (up to 1e-4 of the mean
// diagonal) until the Cholesky succeeds; throws when that fails.
GPModel make_gp(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y, double mean,
                double ell, double signal_var, double noise_var);

// Gaussian log marginal likelihood plus the log prior densities of the four
// hyperparameters.
double log_posterior_density(const GPModel& model, const HyperPriors& priors);

// Gradient in the optimization coordinates (log l, log sigma_f^2, m, log sigma_e^2).
Eigen::Vector4d log_posterior_grad(const GPModel& model, const HyperPriors& priors);

// Best-of-restarts quasi-Newton MAP fit over the log-space coordinates.
GPModel fit_map(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                const HyperPriors& priors, int restarts, Rng& rng);

void posterior(const GPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& Xq, Eigen::VectorXd& mean_out,
               Eigen::MatrixXd& cov_out);

struct EhvRow {
    int subset_size = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct EhvOptions {
    std::vector<int> subset_sizes = {12, 24, 48, 96, 192, 384};
    int n_qmc = 256;
    int n_repeats = 100;
};

// Expected hypervolume of random candidate subsets under the joint posterior,
// one independent GP per objective. Joint samples are drawn by pushing a
// scrambled low-discrepancy point set through the posterior Cholesky factors.
std::vector<EhvRow> expected_hypervolume(const std::vector<GPModel>& models,
                                         const std::vector<Eigen::VectorXd>& candidate_features,
                                         const EhvOptions& opts, const Eigen::VectorXd& reference, Rng& rng);

// Digit-scrambled Halton point set (random linear digit scrambling per prime
// base, seeded); point(i) is in the open unit cube.
class HaltonSampler {
public:
    HaltonSampler(int dim, Rng& rng);
    Eigen::VectorXd point(int index) const;  // index >= 0

private:
    std::vector<int> bases_;
    std::vector<int> multipliers_;
};

// minimize f via two-loop L-BFGS with Armijo backtracking; returns best x.
// f returns the objective and fills the gradient; may return +inf to reject.
struct LbfgsResult {
    Eigen::VectorXd x;
    double fx = 0.0;
    int iterations = 0;
};
LbfgsResult lbfgs_minimize(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x0, int max_iters = 200, double grad_tol = 1e-8);

}  // namespace tcheby
