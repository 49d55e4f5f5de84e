#pragma once

#include "tcheby/util.hpp"
#include "tcheby/vocab.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace tcheby {

// One context x with its observed sequences and reward vectors. Rewards are
// stored in raw units; standardization happens downstream.
struct ContextGroup {
    std::string context_id;
    TokenSeq prompt;                 // may be empty
    std::vector<TokenSeq> sequences; // row n of `rewards` belongs to sequences[n]
    Eigen::MatrixXd rewards;         // N x k

    int item_count() const { return static_cast<int>(sequences.size()); }
};

struct RewardDataset {
    std::vector<std::string> objectives;  // length k
    std::vector<ContextGroup> groups;
    Vocabulary vocab;

    int objective_count() const { return static_cast<int>(objectives.size()); }
    int group_count() const { return static_cast<int>(groups.size()); }
    int total_items() const;
    int group_index(const std::string& context_id) const;  // -1 if absent

    void validate() const;  // throws on any broken invariant
};

// Standardization constants: per-objective scale/mean, per-context
// log-partitions and the mean-equalizing preference vector.
struct RewardStats {
    Eigen::VectorXd sigma;          // k, > 0
    Eigen::VectorXd mu;             // k
    Eigen::MatrixXd log_partition;  // M x k, log Z_i(x_m)
    Eigen::VectorXd lambda_bar;     // k, positive, sums to 1
    double gamma = 0.0;
    std::vector<std::string> warnings;

    // Row of log-partitions for a group; a negative index requests the
    // across-context mean, used for contexts never seen at training time.
    Eigen::VectorXd log_partition_row(int group_index) const;
};

struct PreferenceVector {
    Eigen::VectorXd weights;

    // Clamps entries to >= 1e-6 and renormalizes to the simplex.
    static PreferenceVector normalized(const Eigen::VectorXd& raw);

    void validate() const;  // positive entries summing to 1 (1e-9)
    double min_weight() const { return weights.minCoeff(); }
    int size() const { return static_cast<int>(weights.size()); }
};

struct RunConfig {
    std::string algorithm = "stomp";  // dpo-lin | odpo-lin | odpo-stz | odpo-sq | stomp
    double alpha = 0.0;
    double beta = 0.1;
    double gamma = 0.2;
    double delta = 1.0;
    double tau = 1.0;
    Eigen::VectorXd lambda;  // raw preference weights; normalized at use

    int steps = 200;
    int batch_size = 32;
    int warmup_steps = -1;  // -1: steps / 10

    long effective_warmup() const { return warmup_steps >= 0 ? warmup_steps : steps / 10; }
    double peak_lr = 1e-2;
    double final_lr = 5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 10.0;
    int max_pairs_per_context = 512;
    bool use_lambda_prime = true;   // stomp only: train with the rescaled preference vector
    bool wis_conventional = false;  // evaluate: drop the inner 1/N_m factor

    std::uint64_t seed = 0;
    std::vector<double> checkpoint_fractions = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

    void validate() const;
    std::uint64_t hash() const;  // FNV-1a over the canonical serialization

    std::string to_json() const;
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::string& path);
};

// Column mapping for CSV ingestion. Objective columns default to every header
// column other than context_id/sequence, in file order.
struct DatasetSchema {
    std::string context_col = "context_id";
    std::string sequence_col = "sequence";
    std::vector<std::string> objective_cols;  // empty = infer
};

// Loads `context_id,sequence,<objective...>` CSV. Rows are grouped by
// context_id, preserving file order within groups.
RewardDataset load_dataset(const std::string& path, const Vocabulary& vocab, const DatasetSchema& schema = {});

void save_dataset(const RewardDataset& ds, const std::string& path);

// sigma_i^2 = mean over contexts of the per-context population variance,
// mu_i the mean of per-context means, log Z_i(x_m) = logsumexp_n r_i/(gamma sigma_i),
// lambda_bar proportional to 1 / hierarchical mean of -rho_i.
RewardStats compute_reward_stats(const RewardDataset& ds, double gamma);

}  // namespace tcheby
