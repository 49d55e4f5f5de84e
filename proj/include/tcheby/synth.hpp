#pragma once

#include "tcheby/core.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tcheby {

enum class FrontShape { Convex, Concave };

// How the held-out test split is chosen. Random mimics an iid assay split;
// Compromise keeps the items that score best on their worst objective,
// mimicking a test set of engineered variants selected for every objective at
// once (and removes them from the training library).
enum class TestSelection { Random, Compromise };

struct SyntheticSpec {
    int k = 2;
    double correlation = 0.0;  // target Spearman between objective 1 and the others
    FrontShape front = FrontShape::Convex;
    TestSelection selection = TestSelection::Random;
    int contexts = 1;
    int items_per_context = 100;
    int seq_len = 20;
    std::string alphabet = "ACDEFGHIKLMNPQRSTVWY";
    double noise = 0.1;
    double holdout_fraction = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static SyntheticSpec from_json_text(const std::string& text);
};

struct SynthResult {
    RewardDataset train;
    RewardDataset test;
};

// Seeded reward landscape over random sequences. Rewards are composition
// scores mixed to hit the target Spearman correlation, with an optional
// monotone warp that bends the attainable front into a non-convex region.
SynthResult gen_landscape(const SyntheticSpec& spec);

// n mutually non-dominated points on the curve (cos^2 t, sin^2 t); every
// interior point lies strictly below the chord of its neighbors.
std::vector<Eigen::Vector2d> gen_concave_front(int n_points);

}  // namespace tcheby
