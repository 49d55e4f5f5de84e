#include "tcheby/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcheby {

using nlohmann::json;

void SyntheticSpec::validate() const {
    if (k < 1) throw std::invalid_argument("synth: k must be >= 1");
    if (correlation < -1.0 || correlation > 1.0) throw std::invalid_argument("synth: correlation must be in [-1,1]");
    if (contexts < 1 || items_per_context < 1 || seq_len < 1) throw std::invalid_argument("synth: counts must be >= 1");
    if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
        throw std::invalid_argument("synth: holdout fraction must be in [0,1)");
    if (alphabet.empty()) throw std::invalid_argument("synth: empty alphabet");
}

std::string SyntheticSpec::to_json() const {
    json j;
    j["k"] = k;
    j["correlation"] = correlation;
    j["front"] = front == FrontShape::Concave ? "concave" : "convex";
    j["contexts"] = contexts;
    j["items_per_context"] = items_per_context;
    j["seq_len"] = seq_len;
    j["alphabet"] = alphabet;
    j["noise"] = noise;
    j["holdout_fraction"] = holdout_fraction;
    j["test_selection"] = selection == TestSelection::Compromise ? "compromise" : "random";
    j["seed"] = seed;
    return j.dump(2);
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
    json j = json::parse(text);
    SyntheticSpec s;
    if (j.contains("k")) s.k = j["k"].get<int>();
    if (j.contains("correlation")) s.correlation = j["correlation"].get<double>();
    if (j.contains("front")) s.front = j["front"].get<std::string>() == "concave" ? FrontShape::Concave : FrontShape::Convex;
    if (j.contains("contexts")) s.contexts = j["contexts"].get<int>();
    if (j.contains("items_per_context")) s.items_per_context = j["items_per_context"].get<int>();
    if (j.contains("seq_len")) s.seq_len = j["seq_len"].get<int>();
    if (j.contains("alphabet")) s.alphabet = j["alphabet"].get<std::string>();
    if (j.contains("noise")) s.noise = j["noise"].get<double>();
    if (j.contains("holdout_fraction")) s.holdout_fraction = j["holdout_fraction"].get<double>();
    if (j.contains("test_selection"))
        s.selection = j["test_selection"].get<std::string>() == "compromise" ? TestSelection::Compromise
                                                                             : TestSelection::Random;
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    return s;
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

SynthResult gen_landscape(const SyntheticSpec& spec) {
    spec.validate();
    const Vocabulary vocab(spec.alphabet);
    const int A = vocab.letter_count();
    Rng rng(spec.seed);

    // per-letter weights defining the deterministic composition scores
    Rng wrng = rng.split(1);
    std::vector<Eigen::VectorXd> letter_w;
    for (int i = 0; i < spec.k + 1; ++i) {
        Eigen::VectorXd w(A);
        for (int a = 0; a < A; ++a) w[a] = wrng.normal();
        letter_w.push_back(std::move(w));
    }

    const int n_total = spec.items_per_context;
    const int n_test = static_cast<int>(std::floor(spec.holdout_fraction * n_total));
    const int n_train = n_total - n_test;
    if (n_train < 1) throw std::invalid_argument("synth: holdout leaves no training items");

    // noise shrinks the latent correlation; compensate when mixing
    const double target_pearson = 2.0 * std::sin(M_PI * spec.correlation / 6.0);
    const double var_inflation = 1.0 + spec.noise * spec.noise;
    double c = target_pearson * var_inflation;
    const bool exact_copy = spec.correlation == 1.0 || spec.correlation == -1.0;
    if (!exact_copy && std::abs(c) > 0.999)
        throw std::invalid_argument("synth: target correlation infeasible at this noise level");

    auto score = [&](const TokenSeq& seq, const Eigen::VectorXd& w) {
        double s = 0.0;
        for (int t : seq) s += w[t - 2];
        return s / static_cast<double>(seq.size());
    };

    RewardDataset train, test;
    train.vocab = test.vocab = vocab;
    for (int i = 0; i < spec.k; ++i) {
        train.objectives.push_back("obj" + std::to_string(i + 1));
    }
    test.objectives = train.objectives;

    for (int m = 0; m < spec.contexts; ++m) {
        Rng ctx_rng = rng.split(100 + static_cast<std::uint64_t>(m));
        std::vector<TokenSeq> seqs;
        for (int n = 0; n < n_total; ++n) {
            TokenSeq s(static_cast<std::size_t>(spec.seq_len));
            for (auto& t : s) t = 2 + ctx_rng.uniform_int(A);
            seqs.push_back(std::move(s));
        }

        // standardized latent scores
        Eigen::MatrixXd base(n_total, spec.k + 1);
        for (int i = 0; i < spec.k + 1; ++i) {
            for (int n = 0; n < n_total; ++n) base(n, i) = score(seqs[static_cast<std::size_t>(n)], letter_w[static_cast<std::size_t>(i)]);
            const double mean = base.col(i).mean();
            const double sd = std::sqrt((base.col(i).array() - mean).square().mean());
            base.col(i) = (base.col(i).array() - mean) / (sd > 0 ? sd : 1.0);
        }

        Eigen::MatrixXd z(n_total, spec.k);
        for (int n = 0; n < n_total; ++n) {
            const double a = base(n, 0);
            z(n, 0) = a + spec.noise * ctx_rng.normal();
            for (int i = 1; i < spec.k; ++i) {
                if (exact_copy) {
                    z(n, i) = spec.correlation > 0 ? z(n, 0) : -z(n, 0);
                } else {
                    z(n, i) = c * a + std::sqrt(std::max(0.0, 1.0 - c * c)) * base(n, i) + spec.noise * ctx_rng.normal();
                }
            }
        }

        Eigen::MatrixXd rewards(n_total, spec.k);
        for (int n = 0; n < n_total; ++n) {
            for (int i = 0; i < spec.k; ++i) {
                if (spec.front == FrontShape::Concave) {
                    const double u = normal_cdf(z(n, i));  // monotone squash keeps Spearman
                    rewards(n, i) = u * u;
                } else {
                    rewards(n, i) = z(n, i);
                }
            }
        }

        // holdout split, per context: seeded shuffle, or worst-objective
        // selection with the held-out winners removed from the library
        std::vector<int> order(static_cast<std::size_t>(n_total));
        for (int n = 0; n < n_total; ++n) order[static_cast<std::size_t>(n)] = n;
        if (spec.selection == TestSelection::Compromise) {
            Eigen::VectorXd mu(spec.k), sd(spec.k);
            for (int i = 0; i < spec.k; ++i) {
                mu[i] = rewards.col(i).mean();
                sd[i] = std::sqrt((rewards.col(i).array() - mu[i]).square().mean());
                if (sd[i] <= 0.0) sd[i] = 1.0;
            }
            Eigen::VectorXd worst(n_total);
            for (int n = 0; n < n_total; ++n) {
                double w = std::numeric_limits<double>::infinity();
                for (int i = 0; i < spec.k; ++i) w = std::min(w, (rewards(n, i) - mu[i]) / sd[i]);
                worst[n] = w;
            }
            // ascending: the best-compromise tail lands in the test slice
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (worst[a] != worst[b]) return worst[a] < worst[b];
                return a < b;
            });
        } else {
            Rng split_rng = rng.split(900 + static_cast<std::uint64_t>(m));
            split_rng.shuffle(order);
        }

        const std::string ctx_id = spec.contexts == 1 ? "ctx" : "ctx" + std::to_string(m + 1);
        ContextGroup gtrain, gtest;
        gtrain.context_id = gtest.context_id = ctx_id;
        gtrain.rewards.resize(n_train, spec.k);
        gtest.rewards.resize(std::max(n_test, 0), spec.k);
        for (int idx = 0; idx < n_total; ++idx) {
            const int n = order[static_cast<std::size_t>(idx)];
            if (idx < n_train) {
                gtrain.sequences.push_back(seqs[static_cast<std::size_t>(n)]);
                gtrain.rewards.row(gtrain.item_count() - 1) = rewards.row(n);
            } else {
                gtest.sequences.push_back(seqs[static_cast<std::size_t>(n)]);
                gtest.rewards.row(gtest.item_count() - 1) = rewards.row(n);
            }
        }
        train.groups.push_back(std::move(gtrain));
        if (n_test > 0) test.groups.push_back(std::move(gtest));
    }

    train.validate();
    if (!test.groups.empty()) test.validate();
    return {std::move(train), std::move(test)};
}

std::vector<Eigen::Vector2d> gen_concave_front(int n_points) {
    if (n_points < 3) throw std::invalid_argument("gen_concave_front: need at least 3 points");
    std::vector<Eigen::Vector2d> out;
    out.reserve(static_cast<std::size_t>(n_points));
    // (cos^4 t, sin^4 t) traces sqrt(x) + sqrt(y) = 1: mutually non-dominated
    // with every interior point strictly below its neighbors' chord
    for (int j = 0; j < n_points; ++j) {
        const double t = (M_PI / 2.0) * static_cast<double>(j) / static_cast<double>(n_points - 1);
        const double c2 = std::cos(t) * std::cos(t);
        const double s2 = std::sin(t) * std::sin(t);
        out.emplace_back(c2 * c2, s2 * s2);
    }
    // exact endpoints regardless of trig rounding
    out.front() = Eigen::Vector2d(1.0, 0.0);
    out.back() = Eigen::Vector2d(0.0, 1.0);
    return out;
}

}  // namespace tcheby
