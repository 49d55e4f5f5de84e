// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code = number of failures.

#include "tcheby/cli.hpp"
#include "tcheby/core.hpp"
#include "tcheby/evaluate.hpp"
#include "tcheby/gp.hpp"
#include "tcheby/gwg.hpp"
#include "tcheby/losses.hpp"
#include "tcheby/policy.hpp"
#include "tcheby/scalarize.hpp"
#include "tcheby/synth.hpp"
#include "tcheby/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace tcheby;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("%s  %2d  %s%s%s\n", ok ? "PASS" : "FAIL", idx, name.c_str(), detail.empty() ? "" : " -- ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

RewardDataset dataset_from_points(const std::vector<Eigen::Vector2d>& pts) {
    RewardDataset ds;
    ds.vocab = Vocabulary("AB");
    ds.objectives = {"o1", "o2"};
    ContextGroup g;
    g.context_id = "c";
    g.rewards.resize(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        g.sequences.push_back({2, 3});
        g.rewards.row(static_cast<Eigen::Index>(i)) = pts[i];
    }
    ds.groups.push_back(std::move(g));
    return ds;
}

// ---- criterion 1 -----------------------------------------------------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto front = gen_concave_front(11);
    const RewardDataset ds = dataset_from_points(front);
    const double gamma = 0.2, tau = 0.01;
    const RewardStats stats = compute_reward_stats(ds, gamma);
    const auto& g = ds.groups[0];

    std::set<int> lin_hits, st_hits;
    for (int gi = 0; gi <= 100; ++gi) {
        const PreferenceVector lam =
            PreferenceVector::normalized(Eigen::Vector2d(gi / 100.0, 1.0 - gi / 100.0));
        int best_lin = 0, best_st = 0;
        double lin_v = -1e300, st_v = -1e300;
        for (int i = 0; i < 11; ++i) {
            const double lv = linear_scalarize(g.rewards.row(i), lam, stats).value;
            if (lv > lin_v) {
                lin_v = lv;
                best_lin = i;
            }
            const double sv = st_scalarize(g.rewards.row(i), 0, lam, stats, gamma, tau).value;
            if (sv > st_v) {
                st_v = sv;
                best_st = i;
            }
        }
        lin_hits.insert(best_lin);
        st_hits.insert(best_st);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = lin_hits == std::set<int>{0, 10} && st_hits.size() == 11 && ms < 1000.0;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "linear argmax set size %zu, st coverage %zu/11, %.0f ms",
                  lin_hits.size(), st_hits.size(), ms);
    report(1, "non-convex front recovery", ok, detail);
}

// ---- criterion 2 -----------------------------------------------------------
void criterion_2() {
    Rng rng(20240601);
    const double gamma = 0.2;
    bool ok = true;
    double worst_slack = 0.0;
    for (int t = 0; t < 1000 && ok; ++t) {
        const int k = 2 + rng.uniform_int(4);
        Eigen::VectorXd w(k), rho_v(k);
        for (int i = 0; i < k; ++i) {
            w[i] = 0.05 + rng.uniform();
            rho_v[i] = -5.0 * rng.uniform();
        }
        const PreferenceVector lam = PreferenceVector::normalized(w);
        for (double tau : {1.0, 0.1, 0.01}) {
            const double st = st_from_rho(rho_v, lam, gamma, tau);
            const double hard = hard_tcheby(rho_v, lam);
            const double diff = std::abs(lam.min_weight() * st - hard);
            const double bound = gamma * tau * std::log(static_cast<double>(k));
            worst_slack = std::max(worst_slack, diff - bound);
            if (diff > bound) ok = false;
        }
    }
    report(2, "tau -> 0 limit bound (exact, no slack)", ok,
           "max excess over bound = " + std::to_string(worst_slack));
}

// ---- criteria 3 & 4 --------------------------------------------------------
std::vector<RewardDataset> test_matrix() {
    std::vector<RewardDataset> out;
    int seed = 100;
    for (double corr : {-0.8, 0.0, 0.8}) {
        for (FrontShape fr : {FrontShape::Convex, FrontShape::Concave}) {
            for (int contexts : {1, 3}) {
                SyntheticSpec spec;
                spec.k = 2;
                spec.correlation = corr;
                spec.front = fr;
                spec.contexts = contexts;
                spec.items_per_context = 60;
                spec.seq_len = 10;
                spec.alphabet = "ABCDE";
                spec.holdout_fraction = 0.25;
                spec.seed = static_cast<std::uint64_t>(seed++);
                const SynthResult res = gen_landscape(spec);
                out.push_back(res.train);
                out.push_back(res.test);
            }
        }
    }
    return out;
}

void criteria_3_4(const std::vector<RewardDataset>& matrix) {
    bool rho_ok = true;
    bool mean_ok = true;
    double worst_rho = -1e300, worst_mean_dev = 0.0;
    for (const auto& ds : matrix) {
        const RewardStats st = compute_reward_stats(ds, 0.2);
        const int k = ds.objective_count();
        Eigen::VectorXd neg_rho_mean = Eigen::VectorXd::Zero(k);
        for (int m = 0; m < ds.group_count(); ++m) {
            const auto& g = ds.groups[static_cast<std::size_t>(m)];
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
            for (int n = 0; n < g.item_count(); ++n) {
                const Eigen::VectorXd r = rho(g.rewards.row(n), m, st);
                worst_rho = std::max(worst_rho, r.maxCoeff());
                if ((r.array() > 1e-12).any()) rho_ok = false;
                acc += -r;
            }
            neg_rho_mean += acc / g.item_count();
        }
        neg_rho_mean /= ds.group_count();
        const Eigen::VectorXd weighted = st.lambda_bar.array() * neg_rho_mean.array();
        for (int i = 1; i < k; ++i) {
            const double dev = std::abs(weighted[i] / weighted[0] - 1.0);
            worst_mean_dev = std::max(worst_mean_dev, dev);
            if (dev > 1e-9) mean_ok = false;
        }
    }
    report(3, "rho non-positivity on the synthetic matrix", rho_ok, "max rho = " + std::to_string(worst_rho));
    report(4, "lambda-bar equal-means property", mean_ok,
           "max relative deviation = " + std::to_string(worst_mean_dev));
}

// ---- criterion 5 -----------------------------------------------------------
struct ToyGroup {
    RewardDataset ds;
    SequencePolicy pi0;
    SequencePolicy pi;
    RewardStats stats;
};

ToyGroup make_toy(std::uint64_t seed, int n_items, int k) {
    Rng rng(seed);
    ToyGroup fx;
    fx.ds.vocab = Vocabulary("ABC");
    for (int i = 0; i < k; ++i) fx.ds.objectives.push_back("o" + std::to_string(i));
    ContextGroup g;
    g.context_id = "c";
    g.rewards.resize(n_items, k);
    for (int n = 0; n < n_items; ++n) {
        TokenSeq s;
        const int len = 2 + rng.uniform_int(3);
        for (int t = 0; t < len; ++t) s.push_back(2 + rng.uniform_int(3));
        g.sequences.push_back(std::move(s));
        for (int i = 0; i < k; ++i) g.rewards(n, i) = 2.0 * rng.normal();
    }
    fx.ds.groups.push_back(std::move(g));
    fx.stats = compute_reward_stats(fx.ds, 0.2);
    fx.pi0 = SequencePolicy::uniform(fx.ds.vocab, 6);
    for (auto& b : fx.pi0.blocks) {
        for (Eigen::Index i = 0; i < b.init_logits.size(); ++i) b.init_logits[i] = 0.4 * rng.normal();
        for (Eigen::Index i = 0; i < b.trans_logits.size(); ++i) b.trans_logits.data()[i] = 0.4 * rng.normal();
    }
    fx.pi = fx.pi0;
    for (auto& b : fx.pi.blocks) {
        for (Eigen::Index i = 0; i < b.init_logits.size(); ++i) b.init_logits[i] += 0.3 * rng.normal();
        for (Eigen::Index i = 0; i < b.trans_logits.size(); ++i) b.trans_logits.data()[i] += 0.3 * rng.normal();
    }
    return fx;
}

void criterion_5() {
    bool ok = true;
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 50 && seed < 200; ++seed) {
        ToyGroup fx = make_toy(7000 + seed, 4, 2 + static_cast<int>(seed % 2));
        const RefLogProbs ref = compute_ref_log_probs(fx.pi0, fx.ds);
        const int k = fx.ds.objective_count();
        const PreferenceVector lam = PreferenceVector::normalized(Eigen::VectorXd::Ones(k));
        const double gamma = 0.2, tau = 1.0, beta = 0.1, delta = 0.05;
        std::vector<Eigen::VectorXd> st_rewards = {
            group_scores(fx.ds.groups[0], 0, ScalarizeMethod::St, lam, fx.stats, gamma, tau)};
        Rng prng(seed);
        const auto pairs = build_pairs(st_rewards[0], 0, delta, 0, prng);
        if (pairs.empty()) continue;
        ++checked;
        const LossReport a = stomp_loss(fx.pi, ref, fx.ds, fx.stats, pairs, 0.0, beta, gamma, delta, lam, tau);
        const LossReport b = odpo_loss(fx.pi, ref, fx.ds, pairs, beta, delta, st_rewards);
        if (a.total != b.total) ok = false;
        for (std::size_t bi = 0; bi < a.grad.blocks.size() && ok; ++bi) {
            if (a.grad.blocks[bi].init_logits != b.grad.blocks[bi].init_logits) ok = false;
            if (a.grad.blocks[bi].trans_logits != b.grad.blocks[bi].trans_logits) ok = false;
        }
    }
    report(5, "uniform-lambda collapse, bit for bit", ok && checked == 50,
           std::to_string(checked) + "/50 groups checked");
}

// ---- criterion 6 -----------------------------------------------------------
double policy_param(const SequencePolicy& pi, int idx) {
    for (const auto& b : pi.blocks) {
        if (idx < b.init_logits.size()) return b.init_logits[idx];
        idx -= static_cast<int>(b.init_logits.size());
        if (idx < b.trans_logits.size()) return b.trans_logits.data()[idx];
        idx -= static_cast<int>(b.trans_logits.size());
    }
    throw std::out_of_range("policy_param");
}

void set_policy_param(SequencePolicy& pi, int idx, double v) {
    for (auto& b : pi.blocks) {
        if (idx < b.init_logits.size()) {
            b.init_logits[idx] = v;
            return;
        }
        idx -= static_cast<int>(b.init_logits.size());
        if (idx < b.trans_logits.size()) {
            b.trans_logits.data()[idx] = v;
            return;
        }
        idx -= static_cast<int>(b.trans_logits.size());
    }
    throw std::out_of_range("set_policy_param");
}

double grad_param(const Gradient& g, int idx) {
    for (const auto& b : g.blocks) {
        if (idx < b.init_logits.size()) return b.init_logits[idx];
        idx -= static_cast<int>(b.init_logits.size());
        if (idx < b.trans_logits.size()) return b.trans_logits.data()[idx];
        idx -= static_cast<int>(b.trans_logits.size());
    }
    throw std::out_of_range("grad_param");
}

double max_grad_rel_err(const SequencePolicy& pi, const Gradient& analytic,
                        const std::function<double(const SequencePolicy&)>& f) {
    SequencePolicy work = pi;
    int n = 0;
    for (const auto& b : pi.blocks) n += static_cast<int>(b.init_logits.size() + b.trans_logits.size());
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = policy_param(pi, i);
        set_policy_param(work, i, v + h);
        const double fp = f(work);
        set_policy_param(work, i, v - h);
        const double fm = f(work);
        set_policy_param(work, i, v);
        const double fd = (fp - fm) / (2.0 * h);
        const double a = grad_param(analytic, i);
        worst = std::max(worst, std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}));
    }
    return worst;
}

void criterion_6() {
    double worst = 0.0;
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 20 && seed < 100; ++seed) {
        ToyGroup fx = make_toy(9000 + seed, 4, 2);
        const RefLogProbs ref = compute_ref_log_probs(fx.pi0, fx.ds);
        const PreferenceVector lam = PreferenceVector::normalized(Eigen::Vector2d(0.3, 0.7));
        const double gamma = 0.2, tau = 1.0, beta = 0.2, delta = 0.1, alpha = 0.05;
        std::vector<Eigen::VectorXd> st_r = {
            group_scores(fx.ds.groups[0], 0, ScalarizeMethod::St, lam, fx.stats, gamma, tau)};
        std::vector<Eigen::VectorXd> lin_r = {group_scores(
            fx.ds.groups[0], 0, ScalarizeMethod::Linear,
            PreferenceVector::normalized(Eigen::VectorXd::Ones(2)), fx.stats, gamma, tau)};
        Rng prng(seed);
        const auto pairs = build_pairs(st_r[0], 0, delta, 0, prng);
        if (pairs.empty()) continue;

        // stay away from the clamp kink where the loss is not differentiable
        Eigen::VectorXd st_pol(4);
        for (int n = 0; n < 4; ++n) {
            const double u = log_prob(fx.pi, "c", fx.ds.groups[0].sequences[static_cast<std::size_t>(n)]);
            st_pol[n] = st_policy_from_rho(rho(fx.ds.groups[0].rewards.row(n), 0, fx.stats), u, lam, gamma, tau);
        }
        bool near_kink = false;
        for (const auto& pr : pairs) {
            for (const auto& rw : {st_r[0], lin_r[0], st_pol}) {
                if (std::abs(rw[pr.winner] - rw[pr.loser] + delta - 1.0) < 1e-3) near_kink = true;
            }
        }
        if (near_kink) continue;
        ++checked;

        {
            const LossReport rep = dpo_loss(fx.pi, ref, fx.ds, pairs, beta, alpha);
            worst = std::max(worst, max_grad_rel_err(fx.pi, rep.grad, [&](const SequencePolicy& p) {
                                 return dpo_loss(p, ref, fx.ds, pairs, beta, alpha).total;
                             }));
        }
        {
            const LossReport rep = odpo_loss(fx.pi, ref, fx.ds, pairs, beta, delta, lin_r, alpha);
            worst = std::max(worst, max_grad_rel_err(fx.pi, rep.grad, [&](const SequencePolicy& p) {
                                 return odpo_loss(p, ref, fx.ds, pairs, beta, delta, lin_r, alpha).total;
                             }));
        }
        {
            const LossReport rep = squared_pref_loss(fx.pi, ref, fx.ds, pairs, beta, delta, lin_r, alpha);
            worst = std::max(worst, max_grad_rel_err(fx.pi, rep.grad, [&](const SequencePolicy& p) {
                                 return squared_pref_loss(p, ref, fx.ds, pairs, beta, delta, lin_r, alpha).total;
                             }));
        }
        {
            const LossReport rep = stomp_loss(fx.pi, ref, fx.ds, fx.stats, pairs, alpha, beta, gamma, delta, lam, tau);
            worst = std::max(worst, max_grad_rel_err(fx.pi, rep.grad, [&](const SequencePolicy& p) {
                                 return stomp_loss(p, ref, fx.ds, fx.stats, pairs, alpha, beta, gamma, delta, lam, tau)
                                     .total;
                             }));
        }
    }

    // GP log-posterior gradients
    Rng rng(60);
    HyperPriors priors;
    priors.feature_dim = 2;
    double gp_worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + rng.uniform_int(5);
        Eigen::MatrixXd X(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 2; ++j) X(i, j) = rng.normal();
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = rng.normal();
        Eigen::Vector4d x0;
        x0 << std::log(0.5 + rng.uniform()), std::log(0.5 + rng.uniform()), rng.normal(),
            std::log(0.05 + 0.3 * rng.uniform());
        auto value = [&](const Eigen::Vector4d& x) {
            return log_posterior_density(make_gp(X, y, x[2], std::exp(x[0]), std::exp(x[1]), std::exp(x[3])), priors);
        };
        const Eigen::Vector4d g =
            log_posterior_grad(make_gp(X, y, x0[2], std::exp(x0[0]), std::exp(x0[1]), std::exp(x0[3])), priors);
        for (int i = 0; i < 4; ++i) {
            Eigen::Vector4d xp = x0, xm = x0;
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            const double fd = (value(xp) - value(xm)) / 2e-5;
            gp_worst = std::max(gp_worst, std::abs(g[i] - fd) / std::max({1.0, std::abs(g[i]), std::abs(fd)}));
        }
    }
    const bool ok = worst <= 1e-5 && gp_worst <= 1e-5 && checked == 20;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "loss grads: %d instances, max rel err %.2e; gp grads: max rel err %.2e",
                  checked, worst, gp_worst);
    report(6, "gradient suites vs central finite differences", ok, detail);
}

// ---- criterion 7 -----------------------------------------------------------
void criterion_7() {
    // hand-computable staircase
    std::vector<Eigen::VectorXd> stair;
    for (auto [x, y] : {std::pair{1.0, 3.0}, {2.0, 2.0}, {3.0, 1.0}}) {
        Eigen::VectorXd p(2);
        p << x, y;
        stair.push_back(p);
    }
    const bool stair_ok = hypervolume(stair, Eigen::Vector2d(0.0, 0.0)) == 6.0;

    Rng rng(321);
    int failures = 0;
    for (int t = 0; t < 100; ++t) {
        const int k = (t % 2 == 0) ? 2 : 3;
        std::vector<Eigen::VectorXd> pts;
        const int n = 1 + rng.uniform_int(8);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd p(k);
            for (int d = 0; d < k; ++d) p[d] = 0.05 + rng.uniform();
            pts.push_back(p);
        }
        const Eigen::VectorXd ref = Eigen::VectorXd::Zero(k);
        const double exact = hypervolume(pts, ref);
        Rng mc_rng(4000 + static_cast<std::uint64_t>(t));
        const McEstimate mc = hypervolume_mc(pts, ref, 40000, mc_rng);
        if (std::abs(mc.value - exact) > 3.0 * std::max(mc.stderr_, 1e-12)) ++failures;
    }
    const bool ok = stair_ok && failures <= 2;  // 3 sigma admits rare excursions
    report(7, "hypervolume exact vs monte carlo", ok,
           "staircase exact: " + std::string(stair_ok ? "yes" : "no") + ", mc mismatches: " +
               std::to_string(failures) + "/100");
}

// ---- criterion 8 -----------------------------------------------------------
void criterion_8() {
    Rng rng(88);
    // dataset with several contexts and varying sizes
    RewardDataset ds;
    ds.vocab = Vocabulary("ABCD");
    ds.objectives = {"r1", "r2"};
    for (int m = 0; m < 4; ++m) {
        ContextGroup g;
        g.context_id = "c" + std::to_string(m);
        const int n = 1 + m;
        g.rewards.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            TokenSeq s;
            for (int t = 0; t < 3 + m; ++t) s.push_back(2 + rng.uniform_int(4));
            g.sequences.push_back(std::move(s));
            g.rewards(i, 0) = rng.normal();
            g.rewards(i, 1) = rng.normal();
        }
        ds.groups.push_back(std::move(g));
    }

    SequencePolicy pi = SequencePolicy::uniform(ds.vocab, 8);
    for (auto& b : pi.blocks) {
        for (Eigen::Index i = 0; i < b.init_logits.size(); ++i) b.init_logits[i] = 0.5 * rng.normal();
        for (Eigen::Index i = 0; i < b.trans_logits.size(); ++i) b.trans_logits.data()[i] = 0.5 * rng.normal();
    }

    // identical policies: exact closed form
    const ExpectedReward er = wis_expected_rewards(pi, pi, ds);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
    for (const auto& g : ds.groups) {
        const int N = g.item_count();
        Eigen::VectorXd contrib = Eigen::VectorXd::Zero(2);
        for (int n = 0; n < N; ++n) contrib += (1.0 / N) * g.rewards.row(n).transpose();
        expect += contrib / N;
    }
    expect /= ds.group_count();
    const bool closed_ok = er.values[0] == expect[0] && er.values[1] == expect[1];

    // weight normalization, probed through constant rewards and distinct policies
    RewardDataset ones = ds;
    ones.objectives = {"one"};
    for (auto& g : ones.groups) g.rewards = Eigen::MatrixXd::Ones(g.item_count(), 1);
    SequencePolicy pi2 = pi;
    for (auto& b : pi2.blocks) b.init_logits.array() += 0.3;
    const ExpectedReward unit = wis_expected_rewards(pi2, pi, ones, /*conventional=*/true);
    const bool weights_ok = std::abs(unit.values[0] - 1.0) <= 1e-12;

    report(8, "weighted importance sampling sanity", closed_ok && weights_ok,
           std::string("closed form exact: ") + (closed_ok ? "yes" : "no") +
               ", weight sums within 1e-12: " + (weights_ok ? "yes" : "no"));
}

// ---- criterion 9 -----------------------------------------------------------
void criterion_9() {
    const auto t0 = std::chrono::steady_clock::now();
    const Vocabulary vocab("ABC");
    Rng prng(2300);
    SequencePolicy pi = SequencePolicy::uniform(vocab, 3);
    for (auto& b : pi.blocks) {
        for (Eigen::Index i = 0; i < b.init_logits.size(); ++i) b.init_logits[i] = 0.8 * prng.normal();
        for (Eigen::Index i = 0; i < b.trans_logits.size(); ++i) b.trans_logits.data()[i] = 0.8 * prng.normal();
    }
    const double temp = 2.0;

    std::vector<TokenSeq> states;
    for (int a = 2; a < 5; ++a)
        for (int b2 = 2; b2 < 5; ++b2)
            for (int c = 2; c < 5; ++c) states.push_back({a, b2, c});
    auto sidx = [](const TokenSeq& s) { return (s[0] - 2) * 9 + (s[1] - 2) * 3 + (s[2] - 2); };

    Eigen::VectorXd target(27);
    for (int i = 0; i < 27; ++i) target[i] = std::exp(log_prob(pi, "x", states[static_cast<std::size_t>(i)]));
    target /= target.sum();

    // exact kernel
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(27, 27);
    for (int si = 0; si < 27; ++si) {
        const auto& s = states[static_cast<std::size_t>(si)];
        const double e_s = -log_prob(pi, "x", s);
        const Eigen::MatrixXd g = energy_grad_onehot(pi, "x", s);
        std::vector<std::pair<int, int>> moves;
        Eigen::VectorXd logits(6);
        int mi = 0;
        for (int t = 0; t < 3; ++t)
            for (int v = 2; v < 5; ++v) {
                if (v == s[static_cast<std::size_t>(t)]) continue;
                moves.emplace_back(t, v);
                logits[mi++] = -(g(t, v) - g(t, s[static_cast<std::size_t>(t)])) / temp;
            }
        const Eigen::VectorXd q = softmax(logits);
        for (std::size_t k = 0; k < moves.size(); ++k) {
            TokenSeq c = s;
            c[static_cast<std::size_t>(moves[k].first)] = moves[k].second;
            const double e_c = -log_prob(pi, "x", c);
            const Eigen::MatrixXd gc = energy_grad_onehot(pi, "x", c);
            Eigen::VectorXd lr(6);
            int ri = 0, rev = -1;
            for (int t = 0; t < 3; ++t)
                for (int v = 2; v < 5; ++v) {
                    if (v == c[static_cast<std::size_t>(t)]) continue;
                    if (t == moves[k].first && v == s[static_cast<std::size_t>(t)]) rev = ri;
                    lr[ri++] = -(gc(t, v) - gc(t, c[static_cast<std::size_t>(t)])) / temp;
                }
            const Eigen::VectorXd qr = softmax(lr);
            const double acc = std::min(1.0, std::exp(-(e_c - e_s)) * qr[rev] / q[static_cast<Eigen::Index>(k)]);
            P(si, sidx(c)) += q[static_cast<Eigen::Index>(k)] * acc;
        }
        P(si, si) = 1.0 - P.row(si).sum();
    }
    double db_worst = 0.0;
    for (int a = 0; a < 27; ++a)
        for (int b = 0; b < 27; ++b) {
            if (a == b) continue;
            db_worst = std::max(db_worst, std::abs(target[a] * P(a, b) - target[b] * P(b, a)));
        }

    // empirical chain
    GwgState st = GwgState::initial(pi, "x", states[0]);
    Rng rng(555);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(27);
    for (int s = 0; s < 100000; ++s) {
        const GwgProposal p = propose(st, pi, "x", temp, rng);
        st = accept(st, p, pi, "x", rng);
        counts[sidx(st.seq)] += 1.0;
    }
    counts /= counts.sum();
    const double tv = 0.5 * (counts - target).cwiseAbs().sum();
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = db_worst <= 1e-9 && tv <= 0.05 && sec < 30.0;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "detailed balance gap %.2e, TV %.3f, %.1f s", db_worst, tv, sec);
    report(9, "gibbs-with-gradients correctness", ok, detail);
}

// ---- criterion 10 ----------------------------------------------------------
void criterion_10() {
    Rng rng(70);
    Eigen::MatrixXd X(8, 2);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 2; ++j) X(i, j) = rng.normal();
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) y[i] = 2.0 * rng.normal();
    const double mean_c = 0.4, ell = 1.3, sigf2 = 0.9;
    const GPModel m = make_gp(X, y, mean_c, ell, sigf2, 0.0);

    Eigen::VectorXd mu;
    Eigen::MatrixXd cov;
    posterior(m, X, mu, cov);
    double interp_err = 0.0;
    for (int i = 0; i < 8; ++i) interp_err = std::max(interp_err, std::abs(mu[i] - y[i]));

    Eigen::MatrixXd far(1, 2);
    far << 100.0 * ell + X.col(0).maxCoeff(), 100.0 * ell + X.col(1).maxCoeff();
    posterior(m, far, mu, cov);
    const double mean_err = std::abs(mu[0] - mean_c);
    const double var_err = std::abs(cov(0, 0) - sigf2);
    const bool ok = interp_err <= 1e-6 && mean_err <= 1e-6 && var_err <= 1e-6;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "interp err %.2e, far mean err %.2e, far var err %.2e", interp_err,
                  mean_err, var_err);
    report(10, "gp interpolation and prior reversion", ok, detail);
}

// ---- criterion 11 ----------------------------------------------------------
void criterion_11() {
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<Eigen::Vector2d> lambda_grid = {{1.0 / 3, 2.0 / 3}, {0.5, 0.5}, {2.0 / 3, 1.0 / 3}};
    const std::vector<std::string> algos = {"stomp", "dpo-lin", "odpo-stz"};
    std::map<std::string, std::vector<double>> hv_per_seed;

    std::map<std::pair<std::string, int>, std::vector<Eigen::VectorXd>> points;
    for (int seed = 0; seed < 5; ++seed) {
        SyntheticSpec spec;
        spec.k = 2;
        spec.correlation = -0.8;
        spec.front = FrontShape::Concave;
        spec.contexts = 1;
        spec.items_per_context = 240;
        spec.seq_len = 24;
        spec.alphabet = "ACDEFGHI";
        spec.noise = 0.1;
        spec.holdout_fraction = 1.0 / 3.0;
        spec.seed = 1000 + static_cast<std::uint64_t>(seed);
        const SynthResult data = gen_landscape(spec);

        PretrainOptions popts;
        popts.epochs = 150;
        popts.lr = 0.5;
        const SequencePolicy pi0 = mle_pretrain(data.train, popts);

        for (const auto& algo : algos) {
            for (const auto& lam : lambda_grid) {
                RunConfig cfg;
                cfg.algorithm = algo;
                cfg.lambda = lam;
                cfg.beta = 0.1;
                cfg.delta = 0.5;  // margins here live in z-score-like units
                cfg.gamma = 0.2;
                cfg.tau = 1.0;
                cfg.alpha = algo == "stomp" ? 0.01 : (algo == "odpo-stz" ? 0.05 : 0.02);
                cfg.steps = 300;
                cfg.warmup_steps = 30;
                cfg.batch_size = 32;
                cfg.peak_lr = 0.02;
                cfg.final_lr = 0.01;
                cfg.seed = static_cast<std::uint64_t>(seed);
                const TrainResult res = train(cfg, data.train, pi0);
                for (const auto& ck : res.checkpoints) {
                    const ExpectedReward er = wis_expected_rewards(ck.policy, pi0, data.test);
                    points[{algo, seed}].push_back(er.values);
                }
            }
        }
    }

    // shared reference across every evaluated point
    std::vector<Eigen::VectorXd> all_points;
    for (const auto& [key, pts] : points) all_points.insert(all_points.end(), pts.begin(), pts.end());
    const Eigen::VectorXd ref = default_reference(all_points);

    for (const auto& algo : algos) {
        for (int seed = 0; seed < 5; ++seed) {
            const auto& pts = points[{algo, seed}];
            std::vector<Eigen::VectorXd> front_pts;
            for (int i : pareto_filter(pts)) front_pts.push_back(pts[static_cast<std::size_t>(i)]);
            hv_per_seed[algo].push_back(hypervolume(front_pts, ref));
        }
    }

    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double hv_stomp = mean_of(hv_per_seed["stomp"]);
    const double hv_dpo = mean_of(hv_per_seed["dpo-lin"]);
    const double hv_stz = mean_of(hv_per_seed["odpo-stz"]);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool ok = hv_stomp >= hv_dpo && sec < 600.0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "seed-avg HV: stomp %.4g, dpo-lin %.4g, odpo-stz %.4g (reported, not gated), %.0f s", hv_stomp,
                  hv_dpo, hv_stz, sec);
    report(11, "end-to-end directional check (stomp >= dpo-lin)", ok, detail);
}

// ---- criterion 12 ----------------------------------------------------------
void criterion_12() {
    const fs::path root = fs::temp_directory_path() / "tcheby_acceptance_det";
    fs::remove_all(root);
    fs::create_directories(root / "a");
    fs::create_directories(root / "b");

    auto pipeline = [&](const fs::path& dir) {
        const fs::path cwd = fs::current_path();
        fs::current_path(dir);
        int rc = 0;
        rc |= cli_run({"synth", "--out", "data", "--items", "40", "--seq-len", "8", "--alphabet", "ABCDE", "--rho",
                       "-0.6", "--front", "concave", "--seed", "21"});
        rc |= cli_run({"pretrain", "--data", "data/train.csv", "--out", "ref", "--epochs", "40", "--alphabet",
                       "ABCDE"});
        rc |= cli_run({"train", "--data", "data/train.csv", "--ref", "ref/policy.json", "--out", "runs", "--algo",
                       "stomp", "--lambda", "0.5,0.5", "--steps", "15", "--batch", "8", "--seed", "33"});
        rc |= cli_run({"eval", "--data", "data/test.csv", "--ref", "ref/policy.json", "--run", "runs/run_001",
                       "--out", "eval"});
        rc |= cli_run({"generate", "--policy", "ref/policy.json", "--method", "gwg", "--wild-type", "ABCDEABC",
                       "--trajectories", "4", "--steps", "12", "--max-mutations", "5", "--out", "gen", "--seed",
                       "3"});
        fs::current_path(cwd);
        return rc;
    };
    const int rc_a = pipeline(root / "a");
    const int rc_b = pipeline(root / "b");

    bool ok = rc_a == 0 && rc_b == 0;
    std::string differing;
    if (ok) {
        for (auto it = fs::recursive_directory_iterator(root / "a"); it != fs::recursive_directory_iterator(); ++it) {
            if (!it->is_regular_file()) continue;
            const fs::path rel = fs::relative(it->path(), root / "a");
            std::ifstream fa(it->path(), std::ios::binary);
            std::ifstream fb(root / "b" / rel, std::ios::binary);
            std::stringstream sa, sb;
            sa << fa.rdbuf();
            sb << fb.rdbuf();
            if (sa.str() != sb.str()) {
                ok = false;
                differing = rel.string();
                break;
            }
        }
    }
    report(12, "full-pipeline determinism, byte-identical outputs", ok,
           ok ? "all files identical" : ("first difference: " + differing));
}

}  // namespace

int main() {
    std::printf("acceptance suite (library %s)\n", kVersion);
    criterion_1();
    criterion_2();
    const auto matrix = test_matrix();
    criteria_3_4(matrix);
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria failed\n", g_failures);
    }
    return g_failures;
}
