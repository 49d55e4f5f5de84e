#include "tcheby/trainer.hpp"

#include "tcheby/scalarize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tcheby {

OptimizerState OptimizerState::for_policy(const SequencePolicy& pi, double beta1, double beta2, double eps,
                                          double wd) {
    OptimizerState st;
    st.m = pi.zero_gradient();
    st.v = pi.zero_gradient();
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps = eps;
    st.weight_decay = wd;
    return st;
}

double lr_at(long step, long total_steps, long warmup_steps, double peak_lr, double final_lr) {
    if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step out of range");
    if (warmup_steps < 0 || warmup_steps >= total_steps) throw std::invalid_argument("lr_at: bad warmup");
    if (step <= warmup_steps) {
        if (warmup_steps == 0) return peak_lr;
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const double t = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return final_lr + (peak_lr - final_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

void adamw_step(OptimizerState& state, SequencePolicy& pi, const Gradient& grad, double lr) {
    if (!grad.allFinite()) throw std::runtime_error("adamw_step: non-finite gradient");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    auto update = [&](Eigen::Ref<Eigen::VectorXd> p, Eigen::Ref<Eigen::VectorXd> m, Eigen::Ref<Eigen::VectorXd> v,
                      const Eigen::Ref<const Eigen::VectorXd>& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v.array().matrix() + (1.0 - state.beta2) * g.array().square().matrix();
        if (state.weight_decay != 0.0) p -= lr * state.weight_decay * p;
        p -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + state.eps)).matrix();
    };

    for (std::size_t b = 0; b < pi.blocks.size(); ++b) {
        auto& pb = pi.blocks[b];
        auto& mb = state.m.blocks[b];
        auto& vb = state.v.blocks[b];
        const auto& gb = grad.blocks[b];
        update(pb.init_logits, mb.init_logits, vb.init_logits, gb.init_logits);
        Eigen::Map<Eigen::VectorXd> pt(pb.trans_logits.data(), pb.trans_logits.size());
        Eigen::Map<Eigen::VectorXd> mt(mb.trans_logits.data(), mb.trans_logits.size());
        Eigen::Map<Eigen::VectorXd> vt(vb.trans_logits.data(), vb.trans_logits.size());
        Eigen::Map<const Eigen::VectorXd> gt(gb.trans_logits.data(), gb.trans_logits.size());
        update(pt, mt, vt, gt);
    }
}

namespace {

ScalarizeMethod pairing_method(const std::string& algo) {
    if (algo == "odpo-stz") return ScalarizeMethod::Stz;
    if (algo == "stomp") return ScalarizeMethod::St;
    return ScalarizeMethod::Linear;  // dpo-lin, odpo-lin, odpo-sq
}

}  // namespace

TrainResult train(const RunConfig& config, const RewardDataset& ds, const SequencePolicy& pi0,
                  const std::function<void(const Checkpoint&)>& on_checkpoint) {
    config.validate();
    ds.validate();
    const RewardStats stats = compute_reward_stats(ds, config.gamma);

    Eigen::VectorXd raw_lambda = config.lambda.size() > 0
                                     ? config.lambda
                                     : Eigen::VectorXd::Constant(ds.objective_count(), 1.0 / ds.objective_count());
    PreferenceVector lambda = PreferenceVector::normalized(raw_lambda);
    if (lambda.size() != ds.objective_count())
        throw std::invalid_argument("train: lambda dimension does not match objectives");
    if (config.algorithm == "stomp" && config.use_lambda_prime) lambda = lambda_prime(lambda, stats);

    // Pairing scores are policy-independent for every algorithm, so the
    // qualifying pair sets are fixed; epochs only redo capped subsampling.
    const ScalarizeMethod method = pairing_method(config.algorithm);
    std::vector<Eigen::VectorXd> scores(static_cast<std::size_t>(ds.group_count()));
    for (int m = 0; m < ds.group_count(); ++m)
        scores[static_cast<std::size_t>(m)] = group_scores(ds.groups[static_cast<std::size_t>(m)], m, method, lambda,
                                                           stats, config.gamma, config.tau);

    const RefLogProbs ref = compute_ref_log_probs(pi0, ds);

    SequencePolicy pi = pi0;  // deep copy; the reference stays frozen
    OptimizerState opt = OptimizerState::for_policy(pi, config.adam_beta1, config.adam_beta2, config.adam_eps,
                                                    config.weight_decay);
    const Rng root(config.seed);

    // checkpoint step targets (deduplicated, in order)
    std::vector<std::pair<long, double>> ckpt_steps;
    for (double f : config.checkpoint_fractions) {
        const long s = std::lround(f * config.steps);
        if (!ckpt_steps.empty() && ckpt_steps.back().first == s) ckpt_steps.back().second = f;
        else ckpt_steps.emplace_back(s, f);
    }

    TrainResult result;
    auto emit = [&](double fraction, const MetricsRow& row) {
        Checkpoint ck{fraction, pi, config.hash(), row};
        if (on_checkpoint) on_checkpoint(ck);
        result.checkpoints.push_back(std::move(ck));
    };

    auto run_loss = [&](std::span<const PreferencePair> batch) {
        switch (method) {
            case ScalarizeMethod::St:
                return stomp_loss(pi, ref, ds, stats, batch, config.alpha, config.beta, config.gamma, config.delta,
                                  lambda, config.tau);
            default: break;
        }
        if (config.algorithm == "dpo-lin") return dpo_loss(pi, ref, ds, batch, config.beta, config.alpha);
        if (config.algorithm == "odpo-sq")
            return squared_pref_loss(pi, ref, ds, batch, config.beta, config.delta, scores, config.alpha);
        return odpo_loss(pi, ref, ds, batch, config.beta, config.delta, scores, config.alpha);
    };

    MetricsRow last{};
    long step = 0;
    std::size_t next_ckpt = 0;
    while (next_ckpt < ckpt_steps.size() && ckpt_steps[next_ckpt].first <= step) {
        emit(ckpt_steps[next_ckpt].second, last);
        ++next_ckpt;
    }

    for (int epoch = 0; step < config.steps; ++epoch) {
        Rng pair_rng = root.split(0x70000 + static_cast<std::uint64_t>(epoch));
        Rng shuffle_rng = root.split(0x80000 + static_cast<std::uint64_t>(epoch));

        std::vector<int> ctx_order(static_cast<std::size_t>(ds.group_count()));
        std::iota(ctx_order.begin(), ctx_order.end(), 0);
        shuffle_rng.shuffle(ctx_order);

        std::vector<PreferencePair> epoch_pairs;
        for (int m : ctx_order) {
            auto pairs = build_pairs(scores[static_cast<std::size_t>(m)], m, config.delta,
                                     config.max_pairs_per_context, pair_rng);
            epoch_pairs.insert(epoch_pairs.end(), pairs.begin(), pairs.end());
        }
        if (epoch_pairs.empty())
            throw std::runtime_error("train: no preference pairs satisfy the delta threshold");

        for (std::size_t off = 0; off < epoch_pairs.size() && step < config.steps;
             off += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t len = std::min(static_cast<std::size_t>(config.batch_size), epoch_pairs.size() - off);
            const std::span<const PreferencePair> batch(epoch_pairs.data() + off, len);

            LossReport rep = run_loss(batch);
            const double denom = static_cast<double>(rep.pair_count);
            if (!std::isfinite(rep.total)) {
                result.diverged = true;
                result.metrics.push_back({step + 1, rep.total / denom, rep.pref_term / denom, rep.nll_term / denom,
                                          0.0});
                return result;
            }
            Gradient grad = std::move(rep.grad);
            grad.scale(1.0 / denom);
            if (config.clip_norm > 0.0) {
                const double norm = std::sqrt(grad.squaredNorm());
                if (norm > config.clip_norm) grad.scale(config.clip_norm / norm);
            }
            const double lr = lr_at(step + 1, config.steps, config.effective_warmup(), config.peak_lr,
                                    config.final_lr);
            adamw_step(opt, pi, grad, lr);
            ++step;

            last = {step, rep.total / denom, rep.pref_term / denom, rep.nll_term / denom, lr};
            result.metrics.push_back(last);
            while (next_ckpt < ckpt_steps.size() && ckpt_steps[next_ckpt].first <= step) {
                emit(ckpt_steps[next_ckpt].second, last);
                ++next_ckpt;
            }
        }
    }
    return result;
}

}  // namespace tcheby
