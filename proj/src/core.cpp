#include "tcheby/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace tcheby {

using nlohmann::json;

int RewardDataset::total_items() const {
    int n = 0;
    for (const auto& g : groups) n += g.item_count();
    return n;
}

int RewardDataset::group_index(const std::string& context_id) const {
    for (int i = 0; i < group_count(); ++i) {
        if (groups[static_cast<std::size_t>(i)].context_id == context_id) return i;
    }
    return -1;
}

void RewardDataset::validate() const {
    const int k = objective_count();
    if (k < 1) throw std::invalid_argument("dataset: needs at least one objective");
    if (groups.empty()) throw std::invalid_argument("dataset: no context groups");
    std::set<std::string> seen;
    for (const auto& g : groups) {
        if (!seen.insert(g.context_id).second)
            throw std::invalid_argument("dataset: duplicate context id '" + g.context_id + "'");
        if (g.item_count() < 1) throw std::invalid_argument("dataset: empty group '" + g.context_id + "'");
        if (g.rewards.rows() != g.item_count() || g.rewards.cols() != k)
            throw std::invalid_argument("dataset: reward shape mismatch in group '" + g.context_id + "'");
        if (!g.rewards.allFinite())
            throw std::invalid_argument("dataset: non-finite reward in group '" + g.context_id + "'");
        for (const auto& s : g.sequences) {
            if (s.empty()) throw std::invalid_argument("dataset: empty sequence in group '" + g.context_id + "'");
            for (int t : s) {
                if (!vocab.valid(t) || vocab.is_special(t))
                    throw std::invalid_argument("dataset: token outside vocabulary in group '" + g.context_id + "'");
            }
        }
    }
}

Eigen::VectorXd RewardStats::log_partition_row(int group_index) const {
    if (group_index >= 0) {
        if (group_index >= log_partition.rows()) throw std::out_of_range("RewardStats: group index out of range");
        return log_partition.row(group_index).transpose();
    }
    return log_partition.colwise().mean();
}

PreferenceVector PreferenceVector::normalized(const Eigen::VectorXd& raw) {
    if (raw.size() < 1) throw std::invalid_argument("preference vector: empty");
    Eigen::VectorXd w = raw.cwiseMax(1e-6);
    w /= w.sum();
    PreferenceVector out{w};
    out.validate();
    return out;
}

void PreferenceVector::validate() const {
    if (weights.size() < 1) throw std::invalid_argument("preference vector: empty");
    if ((weights.array() <= 0.0).any()) throw std::invalid_argument("preference vector: entries must be positive");
    if (std::abs(weights.sum() - 1.0) > 1e-9) throw std::invalid_argument("preference vector: must sum to 1");
}

void RunConfig::validate() const {
    if (algorithm != "dpo-lin" && algorithm != "odpo-lin" && algorithm != "odpo-stz" && algorithm != "odpo-sq" &&
        algorithm != "stomp")
        throw std::invalid_argument("config: unknown algorithm '" + algorithm + "'");
    if (beta <= 0.0) throw std::invalid_argument("config: beta must be > 0");
    if (gamma <= 0.0) throw std::invalid_argument("config: gamma must be > 0");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
    if (delta < 0.0) throw std::invalid_argument("config: delta must be >= 0");
    if (steps < 0 || batch_size < 1) throw std::invalid_argument("config: bad step/batch settings");
    if (warmup_steps >= 0 && steps > 0 && warmup_steps >= steps)
        throw std::invalid_argument("config: warmup must be shorter than total steps");
    if (checkpoint_fractions.empty()) throw std::invalid_argument("config: no checkpoint fractions");
    double prev = 0.0;
    for (double f : checkpoint_fractions) {
        if (f <= prev || f > 1.0)
            throw std::invalid_argument("config: checkpoint fractions must be strictly increasing in (0,1]");
        prev = f;
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["algorithm"] = algorithm;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["gamma"] = gamma;
    j["delta"] = delta;
    j["tau"] = tau;
    j["lambda"] = std::vector<double>(lambda.data(), lambda.data() + lambda.size());
    j["steps"] = steps;
    j["batch_size"] = batch_size;
    j["warmup_steps"] = warmup_steps;
    j["peak_lr"] = peak_lr;
    j["final_lr"] = final_lr;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["clip_norm"] = clip_norm;
    j["max_pairs_per_context"] = max_pairs_per_context;
    j["use_lambda_prime"] = use_lambda_prime;
    j["wis_conventional"] = wis_conventional;
    j["seed"] = seed;
    j["checkpoint_fractions"] = checkpoint_fractions;
    return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("algorithm", c.algorithm);
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("gamma", c.gamma);
    get("delta", c.delta);
    get("tau", c.tau);
    if (j.contains("lambda")) {
        const auto v = j.at("lambda").get<std::vector<double>>();
        c.lambda = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    get("steps", c.steps);
    get("batch_size", c.batch_size);
    get("warmup_steps", c.warmup_steps);
    get("peak_lr", c.peak_lr);
    get("final_lr", c.final_lr);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    get("weight_decay", c.weight_decay);
    get("clip_norm", c.clip_norm);
    get("max_pairs_per_context", c.max_pairs_per_context);
    get("use_lambda_prime", c.use_lambda_prime);
    get("wis_conventional", c.wis_conventional);
    get("seed", c.seed);
    get("checkpoint_fractions", c.checkpoint_fractions);
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::uint64_t RunConfig::hash() const {
    const std::string s = to_json();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

double parse_reward(const std::string& s, const std::string& col, int row) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("row " + std::to_string(row) + ": cannot parse '" + s + "' in column " + col);
    }
    if (pos != s.size())
        throw std::runtime_error("row " + std::to_string(row) + ": trailing characters in column " + col);
    if (!std::isfinite(v))
        throw std::runtime_error("row " + std::to_string(row) + ": non-finite reward in column " + col);
    return v;
}

}  // namespace

RewardDataset load_dataset(const std::string& path, const Vocabulary& vocab, const DatasetSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file '" + path + "'");
    const auto header = split_csv_line(line);

    auto col_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("dataset: missing column '" + name + "' in '" + path + "'");
        return static_cast<int>(it - header.begin());
    };
    const int ctx_col = col_of(schema.context_col);
    const int seq_col = col_of(schema.sequence_col);

    std::vector<std::string> objective_cols = schema.objective_cols;
    if (objective_cols.empty()) {
        for (int i = 0; i < static_cast<int>(header.size()); ++i) {
            if (i != ctx_col && i != seq_col) objective_cols.push_back(header[static_cast<std::size_t>(i)]);
        }
    }
    if (objective_cols.empty()) throw std::runtime_error("dataset: no objective columns in '" + path + "'");
    std::vector<int> obj_idx;
    for (const auto& c : objective_cols) obj_idx.push_back(col_of(c));
    const int k = static_cast<int>(obj_idx.size());

    struct RawGroup {
        std::vector<TokenSeq> seqs;
        std::vector<Eigen::VectorXd> rewards;
    };
    std::vector<std::string> order;
    std::map<std::string, RawGroup> raw;

    int row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != static_cast<int>(header.size()))
            throw std::runtime_error("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        const std::string& ctx = fields[static_cast<std::size_t>(ctx_col)];
        TokenSeq seq;
        try {
            seq = vocab.encode(fields[static_cast<std::size_t>(seq_col)]);
        } catch (const std::exception& e) {
            throw std::runtime_error("row " + std::to_string(row) + ": " + e.what());
        }
        if (seq.empty()) throw std::runtime_error("row " + std::to_string(row) + ": empty sequence");
        Eigen::VectorXd r(k);
        for (int i = 0; i < k; ++i)
            r[i] = parse_reward(fields[static_cast<std::size_t>(obj_idx[static_cast<std::size_t>(i)])],
                                objective_cols[static_cast<std::size_t>(i)], row);
        auto it = raw.find(ctx);
        if (it == raw.end()) {
            order.push_back(ctx);
            it = raw.emplace(ctx, RawGroup{}).first;
        }
        it->second.seqs.push_back(std::move(seq));
        it->second.rewards.push_back(std::move(r));
    }
    if (order.empty()) throw std::runtime_error("dataset: no data rows in '" + path + "'");

    RewardDataset ds;
    ds.objectives = objective_cols;
    ds.vocab = vocab;
    for (const auto& ctx : order) {
        auto& rg = raw.at(ctx);
        ContextGroup g;
        g.context_id = ctx;
        g.sequences = std::move(rg.seqs);
        g.rewards.resize(static_cast<Eigen::Index>(g.sequences.size()), k);
        for (Eigen::Index n = 0; n < g.rewards.rows(); ++n)
            g.rewards.row(n) = rg.rewards[static_cast<std::size_t>(n)];
        ds.groups.push_back(std::move(g));
    }
    ds.validate();
    return ds;
}

void save_dataset(const RewardDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dataset: cannot write '" + path + "'");
    out << "context_id,sequence";
    for (const auto& o : ds.objectives) out << ',' << o;
    out << '\n';
    for (const auto& g : ds.groups) {
        for (int n = 0; n < g.item_count(); ++n) {
            out << g.context_id << ',' << ds.vocab.decode(g.sequences[static_cast<std::size_t>(n)]);
            for (int i = 0; i < ds.objective_count(); ++i) out << ',' << fmt_g(g.rewards(n, i));
            out << '\n';
        }
    }
}

RewardStats compute_reward_stats(const RewardDataset& ds, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("compute_reward_stats: gamma must be > 0");
    ds.validate();
    const int k = ds.objective_count();
    const int M = ds.group_count();

    RewardStats st;
    st.gamma = gamma;
    st.sigma.resize(k);
    st.mu.resize(k);
    st.log_partition.resize(M, k);

    Eigen::VectorXd var_sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(k);
    for (int m = 0; m < M; ++m) {
        const auto& g = ds.groups[static_cast<std::size_t>(m)];
        const Eigen::VectorXd gm = g.rewards.colwise().mean();
        mean_sum += gm;
        if (g.item_count() == 1) {
            st.warnings.push_back("context '" + g.context_id + "' has a single item; zero variance contribution");
        } else {
            const Eigen::MatrixXd centered = g.rewards.rowwise() - gm.transpose();
            var_sum += centered.array().square().colwise().mean().matrix().transpose();
        }
    }
    st.mu = mean_sum / M;
    const Eigen::VectorXd sigma2 = var_sum / M;
    for (int i = 0; i < k; ++i) {
        if (sigma2[i] <= 0.0)
            throw std::runtime_error("compute_reward_stats: objective '" + ds.objectives[static_cast<std::size_t>(i)] +
                                     "' is constant (sigma = 0)");
        st.sigma[i] = std::sqrt(sigma2[i]);
    }

    for (int m = 0; m < M; ++m) {
        const auto& g = ds.groups[static_cast<std::size_t>(m)];
        for (int i = 0; i < k; ++i) {
            const Eigen::VectorXd scaled = g.rewards.col(i) / (gamma * st.sigma[i]);
            st.log_partition(m, i) = logsumexp(scaled);
        }
    }

    // lambda_bar_i proportional to the inverse of the hierarchical mean of -rho_i
    Eigen::VectorXd neg_rho_mean = Eigen::VectorXd::Zero(k);
    for (int m = 0; m < M; ++m) {
        const auto& g = ds.groups[static_cast<std::size_t>(m)];
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
        for (int n = 0; n < g.item_count(); ++n) {
            for (int i = 0; i < k; ++i) {
                const double rho = g.rewards(n, i) / st.sigma[i] - gamma * st.log_partition(m, i);
                acc[i] += -rho;
            }
        }
        neg_rho_mean += acc / g.item_count();
    }
    neg_rho_mean /= M;
    st.lambda_bar = neg_rho_mean.cwiseInverse();
    st.lambda_bar /= st.lambda_bar.sum();
    return st;
}

}  // namespace tcheby
