#include "tcheby/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tcheby {

ExpectedReward wis_expected_rewards(const SequencePolicy& pi, const SequencePolicy& pi0, const RewardDataset& testset,
                                    bool conventional) {
    testset.validate();
    const int k = testset.objective_count();
    const int M = testset.group_count();

    ExpectedReward out;
    out.values = Eigen::VectorXd::Zero(k);
    out.ess.resize(M);

    for (int m = 0; m < M; ++m) {
        const auto& g = testset.groups[static_cast<std::size_t>(m)];
        const int N = g.item_count();
        Eigen::VectorXd log_ratio(N);
        for (int n = 0; n < N; ++n) {
            const auto& seq = g.sequences[static_cast<std::size_t>(n)];
            log_ratio[n] = log_prob(pi, g.context_id, seq) - log_prob(pi0, g.context_id, seq);
        }
        const Eigen::VectorXd w = softmax(log_ratio);
        out.ess[m] = 1.0 / w.squaredNorm();

        // plain accumulation order, so the equal-weights case reproduces the
        // closed form bit for bit
        Eigen::VectorXd contrib = Eigen::VectorXd::Zero(k);
        for (int n = 0; n < N; ++n) contrib += w[n] * g.rewards.row(n).transpose();
        if (!conventional) contrib /= static_cast<double>(N);
        out.values += contrib;
    }
    out.values /= static_cast<double>(M);
    return out;
}

namespace {

// a dominates b: >= everywhere, > somewhere (maximization)
bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    bool strict = false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

double hv2d(std::vector<Eigen::VectorXd> pts, const Eigen::VectorXd& ref) {
    std::sort(pts.begin(), pts.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        if (a[0] != b[0]) return a[0] > b[0];
        return a[1] > b[1];
    });
    double hv = 0.0;
    double best_y = ref[1];
    for (const auto& p : pts) {
        if (p[1] > best_y) {
            hv += (p[0] - ref[0]) * (p[1] - best_y);
            best_y = p[1];
        }
    }
    return hv;
}

double hv3d(std::vector<Eigen::VectorXd> pts, const Eigen::VectorXd& ref) {
    // dimension sweep: slabs between consecutive z levels, 2D hypervolume of
    // everything at or above the slab
    std::sort(pts.begin(), pts.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[2] > b[2]; });
    const Eigen::VectorXd ref2 = ref.head(2);
    double hv = 0.0;
    std::vector<Eigen::VectorXd> active;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        active.push_back(pts[i].head(2));
        const double z_hi = pts[i][2];
        const double z_lo = (i + 1 < pts.size()) ? pts[i + 1][2] : ref[2];
        if (z_hi > z_lo) hv += hv2d(active, ref2) * (z_hi - z_lo);
    }
    return hv;
}

std::vector<Eigen::VectorXd> dominating_points(const std::vector<Eigen::VectorXd>& points,
                                               const Eigen::VectorXd& reference) {
    std::vector<Eigen::VectorXd> kept;
    for (const auto& p : points) {
        if (p.size() != reference.size()) throw std::invalid_argument("hypervolume: dimension mismatch");
        if ((p.array() > reference.array()).all()) kept.push_back(p);
    }
    return kept;
}

}  // namespace

std::vector<int> pareto_filter(const std::vector<Eigen::VectorXd>& points) {
    std::vector<int> out;
    const int n = static_cast<int>(points.size());
    for (int i = 0; i < n; ++i) {
        bool dominated = false;
        for (int j = 0; j < n && !dominated; ++j) {
            if (j != i && dominates(points[static_cast<std::size_t>(j)], points[static_cast<std::size_t>(i)]))
                dominated = true;
        }
        if (!dominated) out.push_back(i);
    }
    return out;
}

std::vector<FrontPoint> pareto_filter(const std::vector<FrontPoint>& points) {
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(points.size());
    for (const auto& p : points) vals.push_back(p.values);
    std::vector<FrontPoint> out;
    for (int i : pareto_filter(vals)) out.push_back(points[static_cast<std::size_t>(i)]);
    return out;
}

double hypervolume(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& reference) {
    const int k = static_cast<int>(reference.size());
    if (k != 2 && k != 3)
        throw std::invalid_argument("hypervolume: exact computation supports k in {2,3}; use hypervolume_mc");
    const auto kept = dominating_points(points, reference);
    if (kept.empty()) return 0.0;
    return k == 2 ? hv2d(kept, reference) : hv3d(kept, reference);
}

McEstimate hypervolume_mc(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& reference, int n_samples,
                          Rng& rng) {
    if (n_samples < 1) throw std::invalid_argument("hypervolume_mc: need at least one sample");
    const auto kept = dominating_points(points, reference);
    if (kept.empty()) return {0.0, 0.0};

    const int k = static_cast<int>(reference.size());
    Eigen::VectorXd hi = kept.front();
    for (const auto& p : kept) hi = hi.cwiseMax(p);
    double box = 1.0;
    for (int i = 0; i < k; ++i) box *= hi[i] - reference[i];
    if (!(box > 0.0)) return {0.0, 0.0};

    int dominated = 0;
    Eigen::VectorXd x(k);
    for (int s = 0; s < n_samples; ++s) {
        for (int i = 0; i < k; ++i) x[i] = reference[i] + rng.uniform() * (hi[i] - reference[i]);
        for (const auto& p : kept) {
            if ((p.array() >= x.array()).all()) {
                ++dominated;
                break;
            }
        }
    }
    const double p_hat = static_cast<double>(dominated) / n_samples;
    const double se = box * std::sqrt(p_hat * (1.0 - p_hat) / n_samples);
    return {box * p_hat, se};
}

FrontSelection checkpoint_front(const std::vector<ExpectedReward>& candidates, const Eigen::VectorXd& reference) {
    if (candidates.empty()) throw std::invalid_argument("checkpoint_front: no candidates");
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(candidates.size());
    for (const auto& c : candidates) vals.push_back(c.values);

    FrontSelection sel;
    sel.front = pareto_filter(vals);

    std::vector<Eigen::VectorXd> front_vals;
    for (int i : sel.front) front_vals.push_back(vals[static_cast<std::size_t>(i)]);
    sel.hypervolume = hypervolume(front_vals, reference);

    if (sel.front.size() == 1) {
        sel.top = {sel.front.front()};
        return sel;
    }
    // exhaustive search for the pair with the largest joint hypervolume
    double best = -1.0;
    std::pair<int, int> best_pair{sel.front[0], sel.front[1]};
    for (std::size_t a = 0; a < sel.front.size(); ++a) {
        for (std::size_t b = a + 1; b < sel.front.size(); ++b) {
            const double hv = hypervolume({front_vals[a], front_vals[b]}, reference);
            if (hv > best) {
                best = hv;
                best_pair = {sel.front[a], sel.front[b]};
            }
        }
    }
    sel.top = {best_pair.first, best_pair.second};
    return sel;
}

Eigen::VectorXd default_reference(const std::vector<Eigen::VectorXd>& points, double epsilon) {
    if (points.empty()) throw std::invalid_argument("default_reference: no points");
    Eigen::VectorXd lo = points.front();
    for (const auto& p : points) lo = lo.cwiseMin(p);
    return lo.array() - epsilon;
}

}  // namespace tcheby
