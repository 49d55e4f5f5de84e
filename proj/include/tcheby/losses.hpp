#pragma once

#include "tcheby/core.hpp"
#include "tcheby/policy.hpp"
#include "tcheby/scalarize.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace tcheby {

struct PreferencePair {
    int group = 0;
    int winner = 0;
    int loser = 0;
    double margin = 0.0;  // scalarized R(winner) - R(loser), > delta at construction
};

struct LossReport {
    double total = 0.0;
    double pref_term = 0.0;
    double nll_term = 0.0;  // length-averaged winner NLL, pre-alpha
    Gradient grad;
    int pair_count = 0;
};

// Every ordered pair (w, l) in the group with score[w] - score[l] > delta.
// Above max_pairs a seeded uniform subsample is taken; max_pairs <= 0 means
// unlimited.
std::vector<PreferencePair> build_pairs(const Eigen::Ref<const Eigen::VectorXd>& scores, int group_index, double delta,
                                        int max_pairs, Rng& rng);

// Reference log-likelihoods, precomputed once since the reference is frozen.
struct RefLogProbs {
    std::vector<Eigen::VectorXd> per_group;
};
RefLogProbs compute_ref_log_probs(const SequencePolicy& pi0, const RewardDataset& ds);

// -log sigmoid(beta * (logratio_w - logratio_l)), plus the optional winner-NLL
// regularizer shared by all losses here.
LossReport dpo_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                    std::span<const PreferencePair> pairs, double beta, double alpha = 0.0);

// Offset variant: -log sigmoid(beta * dlogratio - min(1, dR + delta)) with dR
// the scalarized reward difference of the pair.
LossReport odpo_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                     std::span<const PreferencePair> pairs, double beta, double delta,
                     const std::vector<Eigen::VectorXd>& rewards, double alpha = 0.0);

// Squared counterpart: (beta * dlogratio - min(1, dR + delta))^2.
LossReport squared_pref_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                             std::span<const PreferencePair> pairs, double beta, double delta,
                             const std::vector<Eigen::VectorXd>& rewards, double alpha = 0.0);

// Smooth Tchebysheff loss: pairs are built from the policy-independent
// scalarization, the margin inside the sigmoid uses the policy-dependent one,
// and the gradient includes that dependence. Winner NLL enters with weight
// alpha.
LossReport stomp_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                      const RewardStats& stats, std::span<const PreferencePair> pairs, double alpha, double beta,
                      double gamma, double delta, const PreferenceVector& lambda, double tau);

}  // namespace tcheby
