#include "tcheby/gwg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcheby {

int hamming(const TokenSeq& a, const TokenSeq& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hamming: length mismatch");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

GwgState GwgState::initial(const SequencePolicy& pi, const std::string& context, const TokenSeq& wild_type,
                           int trajectory) {
    if (wild_type.empty()) throw std::invalid_argument("gwg: empty wild type");
    GwgState st;
    st.seq = wild_type;
    st.wild_type = wild_type;
    st.energy = -log_prob(pi, context, wild_type);
    st.trajectory = trajectory;
    return st;
}

namespace {

// Flattened proposal logits over (position, letter != current).
struct ProposalTable {
    std::vector<std::pair<int, int>> moves;  // (position, token)
    Eigen::VectorXd log_probs;
};

ProposalTable proposal_table(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq, double temp) {
    const Eigen::MatrixXd g = energy_grad_onehot(pi, context, seq);
    const int L = static_cast<int>(seq.size());
    const int V = pi.vocab.size();

    ProposalTable tab;
    Eigen::VectorXd logits(static_cast<Eigen::Index>(L) * (pi.vocab.letter_count() - 1));
    Eigen::Index idx = 0;
    for (int t = 0; t < L; ++t) {
        const double g_cur = g(t, seq[static_cast<std::size_t>(t)]);
        for (int v = 2; v < V; ++v) {  // letters only; keep length fixed
            if (v == seq[static_cast<std::size_t>(t)]) continue;
            tab.moves.emplace_back(t, v);
            logits[idx++] = -(g(t, v) - g_cur) / temp;
        }
    }
    const double lse = logsumexp(logits);
    tab.log_probs = logits.array() - lse;
    return tab;
}

}  // namespace

GwgProposal propose(const GwgState& state, const SequencePolicy& pi, const std::string& context, double proposal_temp,
                    Rng& rng) {
    if (proposal_temp <= 0.0) throw std::invalid_argument("gwg: proposal temperature must be > 0");
    const ProposalTable fwd = proposal_table(pi, context, state.seq, proposal_temp);

    // inverse-CDF draw over the flattened moves
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t chosen = fwd.moves.size() - 1;
    for (std::size_t i = 0; i < fwd.moves.size(); ++i) {
        acc += std::exp(fwd.log_probs[static_cast<Eigen::Index>(i)]);
        if (u < acc) {
            chosen = i;
            break;
        }
    }

    GwgProposal prop;
    prop.position = fwd.moves[chosen].first;
    prop.token = fwd.moves[chosen].second;
    prop.candidate = state.seq;
    prop.candidate[static_cast<std::size_t>(prop.position)] = prop.token;
    prop.log_q_fwd = fwd.log_probs[static_cast<Eigen::Index>(chosen)];

    const ProposalTable rev = proposal_table(pi, context, prop.candidate, proposal_temp);
    const int old_token = state.seq[static_cast<std::size_t>(prop.position)];
    prop.log_q_rev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rev.moves.size(); ++i) {
        if (rev.moves[i].first == prop.position && rev.moves[i].second == old_token) {
            prop.log_q_rev = rev.log_probs[static_cast<Eigen::Index>(i)];
            break;
        }
    }
    return prop;
}

GwgState accept(const GwgState& state, const GwgProposal& proposal, const SequencePolicy& pi,
                const std::string& context, Rng& rng) {
    const double cand_energy = -log_prob(pi, context, proposal.candidate);
    const double log_accept = -(cand_energy - state.energy) + proposal.log_q_rev - proposal.log_q_fwd;

    GwgState next = state;
    next.step = state.step + 1;
    if (log_accept >= 0.0 || std::log(rng.uniform()) < log_accept) {
        next.seq = proposal.candidate;
        next.energy = cand_energy;
    }
    return next;
}

std::vector<GwgSample> run_trajectories(const SequencePolicy& pi, const std::string& context,
                                        const TokenSeq& wild_type, const GwgOptions& opts, Rng& rng) {
    if (opts.n_trajectories < 1) throw std::invalid_argument("gwg: need at least one trajectory");
    if (opts.n_steps < 0 || opts.max_mutations < 0) throw std::invalid_argument("gwg: bad step/mutation bounds");
    const int thin = std::max(1, opts.thinning);
    const int burn_in = static_cast<int>(std::floor(opts.burn_in_fraction * opts.n_steps));

    std::vector<std::vector<GwgSample>> per_traj(static_cast<std::size_t>(opts.n_trajectories));
    const Rng base = rng.split(0x6767);
    parallel_for(opts.n_trajectories, [&](int tr) {
        Rng traj_rng = base.split(static_cast<std::uint64_t>(tr));
        GwgState st = GwgState::initial(pi, context, wild_type, tr);
        auto maybe_keep = [&](const GwgState& s) {
            if (s.step < burn_in) return;
            if ((s.step - burn_in) % thin != 0) return;
            const int d = hamming(s.seq, wild_type);
            if (d > opts.max_mutations) return;
            per_traj[static_cast<std::size_t>(tr)].push_back({tr, s.step, s.seq, s.energy, d});
        };
        maybe_keep(st);
        for (int step = 0; step < opts.n_steps; ++step) {
            const GwgProposal prop = propose(st, pi, context, opts.proposal_temp, traj_rng);
            st = accept(st, prop, pi, context, traj_rng);
            maybe_keep(st);
        }
    });

    std::vector<GwgSample> out;
    for (auto& v : per_traj) out.insert(out.end(), v.begin(), v.end());
    return out;
}

}  // namespace tcheby
