#pragma once

#include "tcheby/policy.hpp"
#include "tcheby/util.hpp"
#include "tcheby/vocab.hpp"

#include <string>
#include <vector>

namespace tcheby {

// Metropolis-Hastings state over fixed-length sequences with energy
// E(y) = -log pi(y|x).
struct GwgState {
    TokenSeq seq;
    double energy = 0.0;
    int step = 0;
    int trajectory = 0;
    TokenSeq wild_type;

    static GwgState initial(const SequencePolicy& pi, const std::string& context, const TokenSeq& wild_type,
                            int trajectory = 0);
};

struct GwgProposal {
    TokenSeq candidate;
    double log_q_fwd = 0.0;
    double log_q_rev = 0.0;
    int position = 0;
    int token = 0;
};

// Single-site substitution proposal: categorical over (position, letter !=
// current) with logits = -(first-order energy change estimate) / temp. The
// reverse density is evaluated at the candidate.
GwgProposal propose(const GwgState& state, const SequencePolicy& pi, const std::string& context, double proposal_temp,
                    Rng& rng);

// min(1, exp(-dE) q_rev / q_fwd); the accepted state's energy is recomputed
// exactly.
GwgState accept(const GwgState& state, const GwgProposal& proposal, const SequencePolicy& pi,
                const std::string& context, Rng& rng);

struct GwgSample {
    int trajectory = 0;
    int step = 0;
    TokenSeq seq;
    double energy = 0.0;
    int n_mutations = 0;
};

struct GwgOptions {
    int n_trajectories = 1500;
    int n_steps = 300;
    int max_mutations = 10;
    double proposal_temp = 2.0;
    double burn_in_fraction = 0.1;
    int thinning = 1;
};

// Independent trajectories from the wild type; visited states after burn-in
// are kept when their Hamming distance to the wild type is within bounds.
std::vector<GwgSample> run_trajectories(const SequencePolicy& pi, const std::string& context,
                                        const TokenSeq& wild_type, const GwgOptions& opts, Rng& rng);

int hamming(const TokenSeq& a, const TokenSeq& b);

}  // namespace tcheby
