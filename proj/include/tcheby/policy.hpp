#pragma once

#include "tcheby/core.hpp"
#include "tcheby/util.hpp"
#include "tcheby/vocab.hpp"

#include <Eigen/Dense>

#include <string>
#include <unordered_map>
#include <vector>

namespace tcheby {

// One block of first-order Markov parameters: initial logits over tokens and
// a row of transition logits per token. BOS is never emitted; EOS terminates.
struct PolicyParams {
    Eigen::VectorXd init_logits;   // V
    Eigen::MatrixXd trans_logits;  // V x V, row = previous token

    static PolicyParams zeros(int vocab_size) {
        return {Eigen::VectorXd::Zero(vocab_size), Eigen::MatrixXd::Zero(vocab_size, vocab_size)};
    }
};

struct Gradient {
    std::vector<PolicyParams> blocks;

    void setZero();
    void axpy(double a, const Gradient& other);  // this += a * other
    double squaredNorm() const;
    void scale(double a);
    bool allFinite() const;
};

// Toy context-conditioned autoregressive sequence model. Contexts map to
// parameter blocks; unmapped contexts share block 0.
struct SequencePolicy {
    Vocabulary vocab;
    int max_len = 0;
    std::vector<PolicyParams> blocks;
    std::unordered_map<std::string, int> context_block;

    static SequencePolicy uniform(const Vocabulary& vocab, int max_len, int n_blocks = 1);

    int block_index(const std::string& context) const;
    Gradient zero_gradient() const;

    std::string to_json() const;
    static SequencePolicy from_json_text(const std::string& text);
    void save(const std::string& path) const;
    static SequencePolicy load(const std::string& path);
};

// log pi(y|x): init factor, transition factors, and the EOS factor when the
// sequence is shorter than max_len. Always <= 0.
double log_prob(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq);

Gradient log_prob_grad(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq);

// acc += coeff * d log pi(y|x) / d params; avoids materializing per-item gradients
void accumulate_log_prob_grad(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq, double coeff,
                              Gradient& acc);

// Ancestral sampling with temperature and nucleus truncation. May return an
// empty sequence when EOS is drawn first.
TokenSeq sample(const SequencePolicy& pi, const std::string& context, double temperature, double top_p, Rng& rng);

struct PretrainOptions {
    int epochs = 200;
    double lr = 0.5;
    bool per_context_blocks = false;
    int max_len = 0;  // 0 = longest dataset sequence
};

// Gradient-ascent MLE fit of the Markov parameters on the dataset sequences;
// the result is the frozen reference policy.
SequencePolicy mle_pretrain(const RewardDataset& ds, const PretrainOptions& opts = {});

// Gradient of E(y) = -log pi(y|x) w.r.t. a relaxed one-hot encoding of the
// sequence, evaluated at the one-hot point. BOS column entries are +inf.
Eigen::MatrixXd energy_grad_onehot(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq);

// Mean NLL of dataset sequences under pi (diagnostic, used by pretraining tests).
double mean_nll(const SequencePolicy& pi, const RewardDataset& ds);

}  // namespace tcheby
