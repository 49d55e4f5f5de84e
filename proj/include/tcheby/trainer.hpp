#pragma once

#include "tcheby/core.hpp"
#include "tcheby/losses.hpp"
#include "tcheby/policy.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tcheby {

struct OptimizerState {
    Gradient m;  // first moment
    Gradient v;  // second moment
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.0;

    static OptimizerState for_policy(const SequencePolicy& pi, double beta1, double beta2, double eps, double wd);
};

// Linear warmup to peak_lr, then cosine decay to final_lr.
double lr_at(long step, long total_steps, long warmup_steps, double peak_lr, double final_lr);

// Decoupled-weight-decay Adam with bias-corrected moments. Aborts on a
// non-finite gradient.
void adamw_step(OptimizerState& state, SequencePolicy& pi, const Gradient& grad, double lr);

struct MetricsRow {
    long step = 0;
    double loss = 0.0;
    double pref_term = 0.0;
    double nll_term = 0.0;
    double lr = 0.0;
};

struct Checkpoint {
    double fraction = 0.0;
    SequencePolicy policy;
    std::uint64_t config_hash = 0;
    MetricsRow metrics;
};

struct TrainResult {
    std::vector<Checkpoint> checkpoints;
    std::vector<MetricsRow> metrics;
    bool diverged = false;
};

// Runs the configured loss over seeded pair batches in shuffled context order.
// Checkpoints fire at the configured fractions of total steps; on divergence
// training stops and everything emitted so far is kept.
TrainResult train(const RunConfig& config, const RewardDataset& ds, const SequencePolicy& pi0,
                  const std::function<void(const Checkpoint&)>& on_checkpoint = {});

}  // namespace tcheby
