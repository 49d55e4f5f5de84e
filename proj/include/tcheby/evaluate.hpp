#pragma once

#include "tcheby/core.hpp"
#include "tcheby/policy.hpp"
#include "tcheby/util.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tcheby {

struct ExpectedReward {
    Eigen::VectorXd values;  // k
    Eigen::VectorXd ess;     // effective sample size per context
    std::string checkpoint;
    std::string lambda_tag;
};

struct FrontPoint {
    Eigen::VectorXd values;
    std::string provenance;
};

// Self-normalized importance-weighted expected rewards on the test set. The
// default reproduces the estimator with the inner 1/N_m alongside the
// self-normalized weights; `conventional` drops that factor.
ExpectedReward wis_expected_rewards(const SequencePolicy& pi, const SequencePolicy& pi0, const RewardDataset& testset,
                                    bool conventional = false);

// Indices of points not Pareto-dominated (maximization), in input order.
std::vector<int> pareto_filter(const std::vector<Eigen::VectorXd>& points);
std::vector<FrontPoint> pareto_filter(const std::vector<FrontPoint>& points);

// Exact dominated hypervolume for 2 or 3 objectives. Points that fail to
// strictly dominate the reference contribute nothing.
double hypervolume(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& reference);

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

// Uniform-sampling estimate over the reference-bounded box of the point set;
// works in any dimension.
McEstimate hypervolume_mc(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& reference, int n_samples,
                          Rng& rng);

struct FrontSelection {
    std::vector<int> front;  // indices into the candidate list
    double hypervolume = 0.0;
    std::vector<int> top;  // one or two checkpoint indices
};

// Pareto front of candidate expected rewards, its hypervolume, and the pair of
// front points whose joint hypervolume is largest (a single point when the
// front is a singleton).
FrontSelection checkpoint_front(const std::vector<ExpectedReward>& candidates, const Eigen::VectorXd& reference);

// Per-objective minimum over the points minus epsilon; the default reference
// rule for training-time fronts.
Eigen::VectorXd default_reference(const std::vector<Eigen::VectorXd>& points, double epsilon = 1e-9);

}  // namespace tcheby
