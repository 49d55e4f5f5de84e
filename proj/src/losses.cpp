#include "tcheby/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tcheby {

namespace {

// Clamped offset shared by all margin-based losses: min(1, dR + delta).
inline double pair_offset(double reward_diff, double delta, bool* clamped) {
    const double raw = reward_diff + delta;
    if (raw >= 1.0) {
        if (clamped) *clamped = true;
        return 1.0;
    }
    if (clamped) *clamped = false;
    return raw;
}

struct ItemKey {
    int group;
    int item;
    bool operator<(const ItemKey& o) const { return group != o.group ? group < o.group : item < o.item; }
};

// Shared scaffolding: cache current-policy log-probs per distinct item, let the
// per-pair functor produce loss terms and d(loss)/d(log pi) coefficients, then
// accumulate the parameter gradient once per item.
template <typename PairFn>
LossReport run_pairs(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                     std::span<const PreferencePair> pairs, double alpha, PairFn&& fn) {
    LossReport rep;
    rep.grad = pi.zero_gradient();
    rep.pair_count = static_cast<int>(pairs.size());

    std::map<ItemKey, double> log_probs;
    auto lp = [&](int g, int n) {
        const ItemKey key{g, n};
        auto it = log_probs.find(key);
        if (it != log_probs.end()) return it->second;
        const auto& grp = ds.groups[static_cast<std::size_t>(g)];
        const double v = log_prob(pi, grp.context_id, grp.sequences[static_cast<std::size_t>(n)]);
        log_probs.emplace(key, v);
        return v;
    };

    std::map<ItemKey, double> coeff;
    for (const auto& pr : pairs) {
        if (pr.winner == pr.loser) throw std::invalid_argument("loss: pair with winner == loser");
        const auto& grp = ds.groups[static_cast<std::size_t>(pr.group)];
        const double u_w = lp(pr.group, pr.winner);
        const double u_l = lp(pr.group, pr.loser);
        const double lr_w = u_w - ref.per_group[static_cast<std::size_t>(pr.group)][pr.winner];
        const double lr_l = u_l - ref.per_group[static_cast<std::size_t>(pr.group)][pr.loser];

        double cw = 0.0, cl = 0.0;
        rep.pref_term += fn(pr, u_w, u_l, lr_w, lr_l, cw, cl);

        if (alpha != 0.0) {
            const double len = static_cast<double>(grp.sequences[static_cast<std::size_t>(pr.winner)].size());
            rep.nll_term += -u_w / len;
            cw += -alpha / len;
        }
        coeff[ItemKey{pr.group, pr.winner}] += cw;
        coeff[ItemKey{pr.group, pr.loser}] += cl;
    }
    rep.total = rep.pref_term + alpha * rep.nll_term;

    for (const auto& [key, c] : coeff) {
        if (c == 0.0) continue;
        const auto& grp = ds.groups[static_cast<std::size_t>(key.group)];
        accumulate_log_prob_grad(pi, grp.context_id, grp.sequences[static_cast<std::size_t>(key.item)], c, rep.grad);
    }
    return rep;
}

}  // namespace

std::vector<PreferencePair> build_pairs(const Eigen::Ref<const Eigen::VectorXd>& scores, int group_index, double delta,
                                        int max_pairs, Rng& rng) {
    if (delta < 0.0) throw std::invalid_argument("build_pairs: delta must be >= 0");
    std::vector<PreferencePair> out;
    const int n = static_cast<int>(scores.size());
    for (int w = 0; w < n; ++w) {
        for (int l = 0; l < n; ++l) {
            if (w == l) continue;
            const double margin = scores[w] - scores[l];
            if (margin > delta) out.push_back({group_index, w, l, margin});
        }
    }
    if (max_pairs > 0 && static_cast<int>(out.size()) > max_pairs) {
        // reservoir subsample, then restore enumeration order
        std::vector<int> keep(static_cast<std::size_t>(max_pairs));
        for (int i = 0; i < max_pairs; ++i) keep[static_cast<std::size_t>(i)] = i;
        for (int i = max_pairs; i < static_cast<int>(out.size()); ++i) {
            const int j = rng.uniform_int(i + 1);
            if (j < max_pairs) keep[static_cast<std::size_t>(j)] = i;
        }
        std::sort(keep.begin(), keep.end());
        std::vector<PreferencePair> sub;
        sub.reserve(keep.size());
        for (int i : keep) sub.push_back(out[static_cast<std::size_t>(i)]);
        out = std::move(sub);
    }
    return out;
}

RefLogProbs compute_ref_log_probs(const SequencePolicy& pi0, const RewardDataset& ds) {
    RefLogProbs ref;
    ref.per_group.resize(static_cast<std::size_t>(ds.group_count()));
    for (int m = 0; m < ds.group_count(); ++m) {
        const auto& g = ds.groups[static_cast<std::size_t>(m)];
        Eigen::VectorXd v(g.item_count());
        for (int n = 0; n < g.item_count(); ++n)
            v[n] = log_prob(pi0, g.context_id, g.sequences[static_cast<std::size_t>(n)]);
        ref.per_group[static_cast<std::size_t>(m)] = std::move(v);
    }
    return ref;
}

LossReport dpo_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                    std::span<const PreferencePair> pairs, double beta, double alpha) {
    if (beta <= 0.0) throw std::invalid_argument("dpo_loss: beta must be > 0");
    return run_pairs(pi, ref, ds, pairs, alpha,
                     [&](const PreferencePair&, double, double, double lr_w, double lr_l, double& cw, double& cl) {
                         const double z = beta * (lr_w - lr_l);
                         const double s = sigmoid(z) - 1.0;
                         cw += s * beta;
                         cl -= s * beta;
                         return -log_sigmoid(z);
                     });
}

LossReport odpo_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                     std::span<const PreferencePair> pairs, double beta, double delta,
                     const std::vector<Eigen::VectorXd>& rewards, double alpha) {
    if (beta <= 0.0) throw std::invalid_argument("odpo_loss: beta must be > 0");
    return run_pairs(pi, ref, ds, pairs, alpha,
                     [&](const PreferencePair& pr, double, double, double lr_w, double lr_l, double& cw, double& cl) {
                         const auto& rw = rewards[static_cast<std::size_t>(pr.group)];
                         const double d_r = rw[pr.winner] - rw[pr.loser];
                         const double z = beta * (lr_w - lr_l) - pair_offset(d_r, delta, nullptr);
                         const double s = sigmoid(z) - 1.0;
                         cw += s * beta;
                         cl -= s * beta;
                         return -log_sigmoid(z);
                     });
}

LossReport squared_pref_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                             std::span<const PreferencePair> pairs, double beta, double delta,
                             const std::vector<Eigen::VectorXd>& rewards, double alpha) {
    if (beta <= 0.0) throw std::invalid_argument("squared_pref_loss: beta must be > 0");
    return run_pairs(pi, ref, ds, pairs, alpha,
                     [&](const PreferencePair& pr, double, double, double lr_w, double lr_l, double& cw, double& cl) {
                         const auto& rw = rewards[static_cast<std::size_t>(pr.group)];
                         const double d_r = rw[pr.winner] - rw[pr.loser];
                         const double t = beta * (lr_w - lr_l) - pair_offset(d_r, delta, nullptr);
                         cw += 2.0 * t * beta;
                         cl -= 2.0 * t * beta;
                         return t * t;
                     });
}

LossReport stomp_loss(const SequencePolicy& pi, const RefLogProbs& ref, const RewardDataset& ds,
                      const RewardStats& stats, std::span<const PreferencePair> pairs, double alpha, double beta,
                      double gamma, double delta, const PreferenceVector& lambda, double tau) {
    if (beta <= 0.0) throw std::invalid_argument("stomp_loss: beta must be > 0");
    const double lmin = lambda.min_weight();

    // policy-dependent reward and its derivative w.r.t. log pi(y|x)
    auto st_policy = [&](int g, int n, double u, double& dR_du) {
        const auto& grp = ds.groups[static_cast<std::size_t>(g)];
        const Eigen::VectorXd rho_vec = rho(grp.rewards.row(n).transpose(), g, stats);
        const double value = st_policy_from_rho(rho_vec, u, lambda, gamma, tau);
        Eigen::VectorXd args(rho_vec.size());
        for (Eigen::Index i = 0; i < rho_vec.size(); ++i)
            args[i] = ((lambda.weights[i] - lmin) / tau) * u - lambda.weights[i] * rho_vec[i] / (gamma * tau);
        const Eigen::VectorXd p = softmax(args);
        dR_du = -(gamma / lmin) * (p.array() * (lambda.weights.array() - lmin)).sum();
        return value;
    };

    return run_pairs(
        pi, ref, ds, pairs, alpha,
        [&](const PreferencePair& pr, double u_w, double u_l, double lr_w, double lr_l, double& cw, double& cl) {
            double dRw_du = 0.0, dRl_du = 0.0;
            const double r_w = st_policy(pr.group, pr.winner, u_w, dRw_du);
            const double r_l = st_policy(pr.group, pr.loser, u_l, dRl_du);
            bool clamped = false;
            const double z = beta * (lr_w - lr_l) - pair_offset(r_w - r_l, delta, &clamped);
            const double s = sigmoid(z) - 1.0;
            cw += s * (beta - (clamped ? 0.0 : dRw_du));
            cl += s * (-beta + (clamped ? 0.0 : dRl_du));
            return -log_sigmoid(z);
        });
}

}  // namespace tcheby
