#pragma once

#include "tcheby/core.hpp"

#include <Eigen/Dense>

#include <string>

namespace tcheby {

enum class ScalarizeMethod { Linear, Stz, HardTcheby, St, StPolicy };

const char* scalarize_method_name(ScalarizeMethod m);

struct ScalarizedReward {
    double value = 0.0;
    ScalarizeMethod method = ScalarizeMethod::Linear;
    Eigen::VectorXd lambda;
    double tau = 0.0;
    double gamma = 0.0;
};

// Distribution-relative reward rho_i = r_i / sigma_i - gamma * log Z_i(x_m).
// A negative group_index uses the across-context mean log-partition (unseen
// context at generation time); callers should surface that case to the user.
Eigen::VectorXd rho(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index, const RewardStats& stats);

// sum_i lambda_i r_i / sigma_i
ScalarizedReward linear_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, const PreferenceVector& lambda,
                                  const RewardStats& stats);

// -log sum_i lambda_i exp(-(r_i - mu_i) / sigma_i)
ScalarizedReward stz_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, const PreferenceVector& lambda,
                               const RewardStats& stats);

// Smooth Tchebysheff rewards on precomputed rho. The policy-dependent form
// adds ((lambda_i - lambda_min)/tau) * log_pi inside the logsumexp; the
// policy-independent form is the same expression at log_pi = 0, so the two
// agree bit-for-bit whenever all lambda_i are equal.
double st_from_rho(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, const PreferenceVector& lambda, double gamma,
                   double tau);
double st_policy_from_rho(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, double log_pi,
                          const PreferenceVector& lambda, double gamma, double tau);

ScalarizedReward st_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index,
                              const PreferenceVector& lambda, const RewardStats& stats, double gamma, double tau);
ScalarizedReward st_scalarize_policy(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index, double log_pi,
                                     const PreferenceVector& lambda, const RewardStats& stats, double gamma,
                                     double tau);

// min_i lambda_i rho_i, the tau -> 0 limit of lambda_min * st_from_rho
double hard_tcheby(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, const PreferenceVector& lambda);

// lambda'_i = lambda_i * lambda_bar_i / sum_j lambda_j * lambda_bar_j
PreferenceVector lambda_prime(const PreferenceVector& lambda, const RewardStats& stats);

// Per-item scalarized scores for one group under the configured method
// (used for pair construction and the scalarize CLI export).
Eigen::VectorXd group_scores(const ContextGroup& g, int group_index, ScalarizeMethod method,
                             const PreferenceVector& lambda, const RewardStats& stats, double gamma, double tau);

}  // namespace tcheby
