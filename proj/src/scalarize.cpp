#include "tcheby/scalarize.hpp"

#include <cmath>
#include <stdexcept>

namespace tcheby {

const char* scalarize_method_name(ScalarizeMethod m) {
    switch (m) {
        case ScalarizeMethod::Linear: return "linear";
        case ScalarizeMethod::Stz: return "stz";
        case ScalarizeMethod::HardTcheby: return "hard-tcheby";
        case ScalarizeMethod::St: return "st";
        case ScalarizeMethod::StPolicy: return "st-policy";
    }
    return "?";
}

Eigen::VectorXd rho(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index, const RewardStats& stats) {
    if (r.size() != stats.sigma.size()) throw std::invalid_argument("rho: reward dimension mismatch");
    const Eigen::VectorXd log_z = stats.log_partition_row(group_index);
    return (r.array() / stats.sigma.array() - stats.gamma * log_z.array()).matrix();
}

ScalarizedReward linear_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, const PreferenceVector& lambda,
                                  const RewardStats& stats) {
    const double v = (lambda.weights.array() * r.array() / stats.sigma.array()).sum();
    return {v, ScalarizeMethod::Linear, lambda.weights, 0.0, 0.0};
}

ScalarizedReward stz_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, const PreferenceVector& lambda,
                               const RewardStats& stats) {
    // -logsumexp_i( log lambda_i - z_i ) with z the per-objective z-scores
    const Eigen::VectorXd z = ((r - stats.mu).array() / stats.sigma.array()).matrix();
    const Eigen::VectorXd args = lambda.weights.array().log().matrix() - z;
    const double v = -logsumexp(args);
    return {v, ScalarizeMethod::Stz, lambda.weights, 0.0, 0.0};
}

double st_policy_from_rho(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, double log_pi,
                          const PreferenceVector& lambda, double gamma, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("st scalarization: tau must be > 0");
    if (gamma <= 0.0) throw std::invalid_argument("st scalarization: gamma must be > 0");
    if (rho_vec.size() != lambda.size()) throw std::invalid_argument("st scalarization: dimension mismatch");
    const double lmin = lambda.min_weight();
    Eigen::VectorXd args(rho_vec.size());
    for (Eigen::Index i = 0; i < rho_vec.size(); ++i) {
        args[i] = ((lambda.weights[i] - lmin) / tau) * log_pi - lambda.weights[i] * rho_vec[i] / (gamma * tau);
    }
    return -(gamma * tau / lmin) * logsumexp(args);
}

double st_from_rho(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, const PreferenceVector& lambda, double gamma,
                   double tau) {
    return st_policy_from_rho(rho_vec, 0.0, lambda, gamma, tau);
}

ScalarizedReward st_scalarize(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index,
                              const PreferenceVector& lambda, const RewardStats& stats, double gamma, double tau) {
    const double v = st_from_rho(rho(r, group_index, stats), lambda, gamma, tau);
    return {v, ScalarizeMethod::St, lambda.weights, tau, gamma};
}

ScalarizedReward st_scalarize_policy(const Eigen::Ref<const Eigen::VectorXd>& r, int group_index, double log_pi,
                                     const PreferenceVector& lambda, const RewardStats& stats, double gamma,
                                     double tau) {
    const double v = st_policy_from_rho(rho(r, group_index, stats), log_pi, lambda, gamma, tau);
    return {v, ScalarizeMethod::StPolicy, lambda.weights, tau, gamma};
}

double hard_tcheby(const Eigen::Ref<const Eigen::VectorXd>& rho_vec, const PreferenceVector& lambda) {
    if (rho_vec.size() != lambda.size()) throw std::invalid_argument("hard_tcheby: dimension mismatch");
    return (lambda.weights.array() * rho_vec.array()).minCoeff();
}

PreferenceVector lambda_prime(const PreferenceVector& lambda, const RewardStats& stats) {
    if (stats.lambda_bar.size() != lambda.size()) throw std::invalid_argument("lambda_prime: dimension mismatch");
    Eigen::VectorXd w = lambda.weights.array() * stats.lambda_bar.array();
    w /= w.sum();
    return PreferenceVector{w};
}

Eigen::VectorXd group_scores(const ContextGroup& g, int group_index, ScalarizeMethod method,
                             const PreferenceVector& lambda, const RewardStats& stats, double gamma, double tau) {
    Eigen::VectorXd out(g.item_count());
    for (int n = 0; n < g.item_count(); ++n) {
        const Eigen::VectorXd r = g.rewards.row(n).transpose();
        switch (method) {
            case ScalarizeMethod::Linear: out[n] = linear_scalarize(r, lambda, stats).value; break;
            case ScalarizeMethod::Stz: out[n] = stz_scalarize(r, lambda, stats).value; break;
            case ScalarizeMethod::St: out[n] = st_scalarize(r, group_index, lambda, stats, gamma, tau).value; break;
            case ScalarizeMethod::HardTcheby: out[n] = hard_tcheby(rho(r, group_index, stats), lambda); break;
            case ScalarizeMethod::StPolicy:
                throw std::invalid_argument("group_scores: policy-dependent scalarization needs log-likelihoods");
        }
    }
    return out;
}

}  // namespace tcheby
