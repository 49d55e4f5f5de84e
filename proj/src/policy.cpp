#include "tcheby/policy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tcheby {

using nlohmann::json;

namespace {

constexpr int kBos = Vocabulary::kBos;
constexpr int kEos = Vocabulary::kEos;

// log-softmax over all tokens except BOS; the BOS entry is -inf.
Eigen::VectorXd masked_log_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
    const int V = static_cast<int>(logits.size());
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < V; ++j)
        if (j != kBos) m = std::max(m, logits[j]);
    long double acc = 0.0L;
    for (int j = 0; j < V; ++j)
        if (j != kBos) acc += std::exp(static_cast<long double>(logits[j] - m));
    const double lse = m + static_cast<double>(std::log(acc));
    Eigen::VectorXd out(V);
    for (int j = 0; j < V; ++j) out[j] = (j == kBos) ? -std::numeric_limits<double>::infinity() : logits[j] - lse;
    return out;
}

void check_sequence(const SequencePolicy& pi, const TokenSeq& seq) {
    if (static_cast<int>(seq.size()) > pi.max_len)
        throw std::invalid_argument("policy: sequence longer than max_len");
    for (int t : seq) {
        if (!pi.vocab.valid(t) || pi.vocab.is_special(t))
            throw std::invalid_argument("policy: invalid token in sequence");
    }
}

}  // namespace

void Gradient::setZero() {
    for (auto& b : blocks) {
        b.init_logits.setZero();
        b.trans_logits.setZero();
    }
}

void Gradient::axpy(double a, const Gradient& other) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].init_logits += a * other.blocks[i].init_logits;
        blocks[i].trans_logits += a * other.blocks[i].trans_logits;
    }
}

double Gradient::squaredNorm() const {
    double s = 0.0;
    for (const auto& b : blocks) s += b.init_logits.squaredNorm() + b.trans_logits.squaredNorm();
    return s;
}

void Gradient::scale(double a) {
    for (auto& b : blocks) {
        b.init_logits *= a;
        b.trans_logits *= a;
    }
}

bool Gradient::allFinite() const {
    for (const auto& b : blocks) {
        if (!b.init_logits.allFinite() || !b.trans_logits.allFinite()) return false;
    }
    return true;
}

SequencePolicy SequencePolicy::uniform(const Vocabulary& vocab, int max_len, int n_blocks) {
    if (max_len < 1) throw std::invalid_argument("policy: max_len must be >= 1");
    SequencePolicy pi;
    pi.vocab = vocab;
    pi.max_len = max_len;
    pi.blocks.assign(static_cast<std::size_t>(n_blocks), PolicyParams::zeros(vocab.size()));
    return pi;
}

int SequencePolicy::block_index(const std::string& context) const {
    const auto it = context_block.find(context);
    return it == context_block.end() ? 0 : it->second;
}

Gradient SequencePolicy::zero_gradient() const {
    Gradient g;
    g.blocks.assign(blocks.size(), PolicyParams::zeros(vocab.size()));
    return g;
}

double log_prob(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq) {
    check_sequence(pi, seq);
    const auto& p = pi.blocks[static_cast<std::size_t>(pi.block_index(context))];
    double lp = 0.0;
    Eigen::VectorXd lsm = masked_log_softmax(p.init_logits);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        lp += lsm[seq[t]];
        lsm = masked_log_softmax(p.trans_logits.row(static_cast<Eigen::Index>(seq[t])).transpose());
    }
    if (static_cast<int>(seq.size()) < pi.max_len) lp += lsm[kEos];
    return lp;
}

void accumulate_log_prob_grad(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq, double coeff,
                              Gradient& acc) {
    check_sequence(pi, seq);
    const int bi = pi.block_index(context);
    const auto& p = pi.blocks[static_cast<std::size_t>(bi)];
    auto& g = acc.blocks[static_cast<std::size_t>(bi)];

    // d lsm[c] / d logits[j] = onehot(c)[j] - softmax[j] on the unmasked support
    auto add_init = [&](int token) {
        const Eigen::VectorXd lsm = masked_log_softmax(p.init_logits);
        for (int j = 0; j < static_cast<int>(lsm.size()); ++j) {
            if (j != kBos) g.init_logits[j] -= coeff * std::exp(lsm[j]);
        }
        g.init_logits[token] += coeff;
    };
    auto add_trans = [&](int row, int token) {
        const Eigen::VectorXd lsm = masked_log_softmax(p.trans_logits.row(row).transpose());
        for (int j = 0; j < static_cast<int>(lsm.size()); ++j) {
            if (j != kBos) g.trans_logits(row, j) -= coeff * std::exp(lsm[j]);
        }
        g.trans_logits(row, token) += coeff;
    };

    int prev = -1;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        if (t == 0) {
            add_init(seq[t]);
        } else {
            add_trans(prev, seq[t]);
        }
        prev = seq[t];
    }
    if (static_cast<int>(seq.size()) < pi.max_len) {
        if (prev < 0) {
            add_init(kEos);
        } else {
            add_trans(prev, kEos);
        }
    }
}

Gradient log_prob_grad(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq) {
    Gradient g = pi.zero_gradient();
    accumulate_log_prob_grad(pi, context, seq, 1.0, g);
    return g;
}

TokenSeq sample(const SequencePolicy& pi, const std::string& context, double temperature, double top_p, Rng& rng) {
    if (temperature <= 0.0) throw std::invalid_argument("sample: temperature must be > 0");
    if (top_p <= 0.0 || top_p > 1.0) throw std::invalid_argument("sample: top_p must be in (0, 1]");
    const auto& p = pi.blocks[static_cast<std::size_t>(pi.block_index(context))];
    const int V = pi.vocab.size();

    TokenSeq out;
    Eigen::VectorXd logits = p.init_logits;
    while (static_cast<int>(out.size()) < pi.max_len) {
        // temperature then nucleus truncation
        Eigen::VectorXd lsm = masked_log_softmax((logits / temperature).eval());
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(V - 1));
        for (int j = 0; j < V; ++j)
            if (j != kBos) idx.push_back(j);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (lsm[a] != lsm[b]) return lsm[a] > lsm[b];
            return a < b;
        });
        double cum = 0.0;
        std::size_t keep = 0;
        while (keep < idx.size()) {
            cum += std::exp(lsm[idx[keep]]);
            ++keep;
            if (cum >= top_p) break;
        }
        const double u = rng.uniform() * cum;
        double acc = 0.0;
        int chosen = idx[keep - 1];
        for (std::size_t j = 0; j < keep; ++j) {
            acc += std::exp(lsm[idx[j]]);
            if (u < acc) {
                chosen = idx[j];
                break;
            }
        }
        if (chosen == kEos) break;
        out.push_back(chosen);
        logits = p.trans_logits.row(chosen).transpose();
    }
    return out;
}

SequencePolicy mle_pretrain(const RewardDataset& ds, const PretrainOptions& opts) {
    ds.validate();
    int longest = 0;
    int n_seqs = 0;
    for (const auto& g : ds.groups) {
        for (const auto& s : g.sequences) longest = std::max(longest, static_cast<int>(s.size()));
        n_seqs += g.item_count();
    }
    if (n_seqs == 0) throw std::invalid_argument("mle_pretrain: empty dataset");
    const int max_len = opts.max_len > 0 ? opts.max_len : longest;

    const int n_blocks = opts.per_context_blocks ? ds.group_count() : 1;
    SequencePolicy pi = SequencePolicy::uniform(ds.vocab, max_len, n_blocks);
    if (opts.per_context_blocks) {
        for (int m = 0; m < ds.group_count(); ++m)
            pi.context_block[ds.groups[static_cast<std::size_t>(m)].context_id] = m;
    }

    Gradient grad = pi.zero_gradient();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        grad.setZero();
        for (const auto& g : ds.groups) {
            for (const auto& s : g.sequences) accumulate_log_prob_grad(pi, g.context_id, s, 1.0 / n_seqs, grad);
        }
        for (std::size_t b = 0; b < pi.blocks.size(); ++b) {
            pi.blocks[b].init_logits += opts.lr * grad.blocks[b].init_logits;
            pi.blocks[b].trans_logits += opts.lr * grad.blocks[b].trans_logits;
        }
    }
    return pi;
}

Eigen::MatrixXd energy_grad_onehot(const SequencePolicy& pi, const std::string& context, const TokenSeq& seq) {
    check_sequence(pi, seq);
    if (seq.empty()) throw std::invalid_argument("energy_grad_onehot: empty sequence");
    const auto& p = pi.blocks[static_cast<std::size_t>(pi.block_index(context))];
    const int V = pi.vocab.size();
    const int L = static_cast<int>(seq.size());
    const bool has_eos = L < pi.max_len;

    // log pi as a bilinear function of the one-hot rows x_t:
    //   sum_j x_1[j] lsm0[j] + sum_t sum_{r,c} x_{t-1}[r] x_t[c] lsmT[r][c] + sum_r x_L[r] lsmT[r][eos]
    const Eigen::VectorXd lsm0 = masked_log_softmax(p.init_logits);
    Eigen::MatrixXd lsmT(V, V);
    for (int r = 0; r < V; ++r) lsmT.row(r) = masked_log_softmax(p.trans_logits.row(r).transpose()).transpose();

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(L, V);
    for (int t = 0; t < L; ++t) {
        for (int v = 0; v < V; ++v) {
            double d = 0.0;
            if (t == 0) d += lsm0[v];
            if (t > 0) d += lsmT(seq[static_cast<std::size_t>(t - 1)], v);
            if (t < L - 1) d += lsmT(v, seq[static_cast<std::size_t>(t + 1)]);
            if (t == L - 1 && has_eos) d += lsmT(v, kEos);
            grad(t, v) = -d;  // energy is the negative log-likelihood
        }
    }
    return grad;
}

double mean_nll(const SequencePolicy& pi, const RewardDataset& ds) {
    double s = 0.0;
    int n = 0;
    for (const auto& g : ds.groups) {
        for (const auto& seq : g.sequences) {
            s += -log_prob(pi, g.context_id, seq);
            ++n;
        }
    }
    return s / n;
}

std::string SequencePolicy::to_json() const {
    json j;
    j["format_version"] = 1;
    j["alphabet"] = vocab.letters();
    j["max_len"] = max_len;
    json jb = json::array();
    for (const auto& b : blocks) {
        json e;
        e["init"] = std::vector<double>(b.init_logits.data(), b.init_logits.data() + b.init_logits.size());
        std::vector<double> tl(static_cast<std::size_t>(b.trans_logits.size()));
        Eigen::Map<Eigen::MatrixXd>(tl.data(), b.trans_logits.rows(), b.trans_logits.cols()) = b.trans_logits;
        e["trans"] = tl;
        jb.push_back(std::move(e));
    }
    j["blocks"] = std::move(jb);
    json cb = json::object();
    for (const auto& [ctx, bi] : context_block) cb[ctx] = bi;
    j["context_block"] = std::move(cb);
    return j.dump();
}

SequencePolicy SequencePolicy::from_json_text(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) throw std::runtime_error("policy: unsupported checkpoint version");
    SequencePolicy pi;
    pi.vocab = Vocabulary(j.at("alphabet").get<std::string>());
    pi.max_len = j.at("max_len").get<int>();
    const int V = pi.vocab.size();
    for (const auto& e : j.at("blocks")) {
        PolicyParams b = PolicyParams::zeros(V);
        const auto init = e.at("init").get<std::vector<double>>();
        const auto trans = e.at("trans").get<std::vector<double>>();
        if (static_cast<int>(init.size()) != V || static_cast<int>(trans.size()) != V * V)
            throw std::runtime_error("policy: checkpoint shape mismatch");
        b.init_logits = Eigen::Map<const Eigen::VectorXd>(init.data(), V);
        b.trans_logits = Eigen::Map<const Eigen::MatrixXd>(trans.data(), V, V);
        pi.blocks.push_back(std::move(b));
    }
    if (pi.blocks.empty()) throw std::runtime_error("policy: checkpoint has no parameter blocks");
    for (const auto& [ctx, bi] : j.at("context_block").items()) {
        const int b = bi.get<int>();
        if (b < 0 || b >= static_cast<int>(pi.blocks.size()))
            throw std::runtime_error("policy: context block out of range");
        pi.context_block[ctx] = b;
    }
    return pi;
}

void SequencePolicy::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("policy: cannot write '" + path + "'");
    out << to_json() << '\n';
}

SequencePolicy SequencePolicy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("policy: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

}  // namespace tcheby
