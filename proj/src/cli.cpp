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
#include "tcheby/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace tcheby {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Eigen::VectorXd parse_vector(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) vals.push_back(std::stod(tok));
    }
    if (vals.empty()) throw std::invalid_argument("expected a comma-separated list of numbers: '" + csv + "'");
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::string lambda_tag(const Eigen::VectorXd& lambda) {
    std::string s;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (i) s += '|';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", lambda[i]);
        s += buf;
    }
    return s;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& argv,
                    std::uint64_t seed, std::uint64_t config_hash = 0) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["args"] = argv;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash));
    j["config_hash"] = buf;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
}

struct CommonFlags {
    std::string config_path;
    std::string out = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig load_config_with_overrides(CLI::App* cmd, const CommonFlags& common) {
    RunConfig cfg;
    if (!common.config_path.empty()) cfg = RunConfig::load(common.config_path);
    if (common.seed_set) cfg.seed = common.seed;
    // CLI flags override config keys; CLI11 tells us which were provided
    auto override_d = [&](const char* flag, double& field) {
        if (cmd->count(flag)) field = cmd->get_option(flag)->as<double>();
    };
    override_d("--alpha", cfg.alpha);
    override_d("--beta", cfg.beta);
    override_d("--gamma", cfg.gamma);
    override_d("--delta", cfg.delta);
    override_d("--tau", cfg.tau);
    if (cmd->count("--algo")) cfg.algorithm = cmd->get_option("--algo")->as<std::string>();
    if (cmd->count("--steps")) cfg.steps = cmd->get_option("--steps")->as<int>();
    if (cmd->count("--batch")) cfg.batch_size = cmd->get_option("--batch")->as<int>();
    if (cmd->count("--warmup")) cfg.warmup_steps = cmd->get_option("--warmup")->as<int>();
    if (cmd->count("--checkpoints")) {
        const Eigen::VectorXd f = parse_vector(cmd->get_option("--checkpoints")->as<std::string>());
        cfg.checkpoint_fractions.assign(f.data(), f.data() + f.size());
    }
    return cfg;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string s = "step,loss,pref_term,nll_term,lr\n";
    for (const auto& r : rows) {
        s += std::to_string(r.step) + ',' + fmt_g(r.loss) + ',' + fmt_g(r.pref_term) + ',' + fmt_g(r.nll_term) + ',' +
             fmt_g(r.lr) + '\n';
    }
    return s;
}

std::string ckpt_name(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%.2f.json", fraction);
    return buf;
}

struct EvalRow {
    std::string checkpoint;
    std::string lambda;
    Eigen::VectorXd values;
    double ess_mean = 0.0;
    double ess_min = 0.0;
};

std::string expected_rewards_csv(const std::vector<std::string>& objectives, const std::vector<EvalRow>& rows) {
    std::string s = "checkpoint,lambda";
    for (const auto& o : objectives) s += ",obj:" + o;
    s += ",ess_mean,ess_min\n";
    for (const auto& r : rows) {
        s += r.checkpoint + ',' + r.lambda;
        for (Eigen::Index i = 0; i < r.values.size(); ++i) s += ',' + fmt_g(r.values[i]);
        s += ',' + fmt_g(r.ess_mean) + ',' + fmt_g(r.ess_min) + '\n';
    }
    return s;
}

std::vector<EvalRow> read_expected_rewards_csv(const std::string& path, std::vector<std::string>& objectives_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty expected-rewards file '" + path + "'");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    std::vector<int> obj_cols;
    objectives_out.clear();
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[static_cast<std::size_t>(i)].rfind("obj:", 0) == 0) {
            obj_cols.push_back(i);
            objectives_out.push_back(header[static_cast<std::size_t>(i)].substr(4));
        }
    }
    if (obj_cols.empty()) throw std::runtime_error("no objective columns in '" + path + "'");
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        EvalRow r;
        r.checkpoint = fields.at(0);
        r.lambda = fields.at(1);
        r.values.resize(static_cast<Eigen::Index>(obj_cols.size()));
        for (std::size_t i = 0; i < obj_cols.size(); ++i)
            r.values[static_cast<Eigen::Index>(i)] = std::stod(fields.at(static_cast<std::size_t>(obj_cols[i])));
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_front_outputs(const fs::path& dir, const std::vector<std::string>& objectives,
                         const std::vector<EvalRow>& rows, const Eigen::VectorXd& reference) {
    std::vector<ExpectedReward> cands;
    for (const auto& r : rows) cands.push_back({r.values, Eigen::VectorXd(), r.checkpoint, r.lambda});
    const FrontSelection sel = checkpoint_front(cands, reference);

    std::string fcsv = "checkpoint,lambda";
    for (const auto& o : objectives) fcsv += ",obj:" + o;
    fcsv += "\n";
    json jfront = json::array();
    for (int i : sel.front) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        fcsv += r.checkpoint + ',' + r.lambda;
        json pv = json::array();
        for (Eigen::Index d = 0; d < r.values.size(); ++d) {
            fcsv += ',' + fmt_g(r.values[d]);
            pv.push_back(r.values[d]);
        }
        fcsv += '\n';
        jfront.push_back({{"checkpoint", r.checkpoint}, {"lambda", r.lambda}, {"values", pv}});
    }
    write_file(dir / "front.csv", fcsv);

    json j;
    j["hypervolume"] = sel.hypervolume;
    j["reference"] = std::vector<double>(reference.data(), reference.data() + reference.size());
    j["front"] = jfront;
    json top = json::array();
    for (int i : sel.top) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        top.push_back({{"checkpoint", r.checkpoint}, {"lambda", r.lambda}});
    }
    j["top_checkpoints"] = top;
    write_file(dir / "hypervolume.json", j.dump(2) + "\n");
}

int run_impl(const std::vector<std::string>& argv) {
    CLI::App app{"multi-objective offline preference optimization toolkit"};
    app.require_subcommand(1);

    CommonFlags common;
    std::string data_path, test_path, ref_policy_path, run_dir, policy_path, method = "st";
    std::vector<std::string> lambda_strs, input_paths;
    std::string wild_type, context_id = "ctx", ref_str, gp_path, candidates_path, k_sizes_str;
    double rho_target = 0.0, noise = 0.1, holdout = 0.25, gamma_flag = 0.2, tau_flag = 1.0;
    double temperature = 1.0, top_p = 0.95, proposal_temp = 2.0, burn_in = 0.1, lr = 0.5;
    int k_obj = 2, contexts = 1, items = 200, seq_len = 20, epochs = 200, n_samples = 100;
    int trajectories = 1500, steps = 300, max_mutations = 10, restarts = 4, n_qmc = 256, repeats = 100;
    std::string front_shape = "convex", alphabet = "ACDEFGHIKLMNPQRSTVWY", test_selection = "random";
    bool per_context = false, conventional_wis = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "JSON config file; flags override its keys");
        cmd->add_option("--out", common.out, "output directory");
        cmd->add_option("--seed", common.seed, "RNG seed")->each([&](const std::string&) { common.seed_set = true; });
    };
    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--algo", "algorithm: dpo-lin|odpo-lin|odpo-stz|odpo-sq|stomp");
        cmd->add_option("--alpha", "NLL regularizer weight");
        cmd->add_option("--beta", "KL strength");
        cmd->add_option("--gamma", "scalarization gamma");
        cmd->add_option("--delta", "pairing threshold");
        cmd->add_option("--tau", "smoothing temperature");
        cmd->add_option("--steps", "training steps");
        cmd->add_option("--batch", "pairs per batch");
        cmd->add_option("--warmup", "warmup steps (default: steps/10)");
        cmd->add_option("--checkpoints", "comma-separated checkpoint fractions");
    };

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic reward landscape");
    add_common(synth);
    synth->add_option("--k", k_obj, "objective count");
    synth->add_option("--rho", rho_target, "target Spearman correlation");
    synth->add_option("--front", front_shape, "convex|concave");
    synth->add_option("--contexts", contexts, "context count");
    synth->add_option("--items", items, "items per context");
    synth->add_option("--seq-len", seq_len, "sequence length");
    synth->add_option("--alphabet", alphabet, "sequence alphabet");
    synth->add_option("--noise", noise, "noise level");
    synth->add_option("--holdout", holdout, "test fraction");
    synth->add_option("--test-selection", test_selection, "random|compromise holdout");

    // ---- stats ----
    auto* stats_cmd = app.add_subcommand("stats", "compute reward statistics");
    add_common(stats_cmd);
    stats_cmd->add_option("--data", data_path, "dataset CSV")->required();
    stats_cmd->add_option("--gamma", gamma_flag, "scalarization gamma");
    stats_cmd->add_option("--alphabet", alphabet, "sequence alphabet");

    // ---- pretrain ----
    auto* pretrain = app.add_subcommand("pretrain", "MLE-fit the reference policy");
    add_common(pretrain);
    pretrain->add_option("--data", data_path, "dataset CSV")->required();
    pretrain->add_option("--epochs", epochs, "gradient-ascent epochs");
    pretrain->add_option("--lr", lr, "learning rate");
    pretrain->add_option("--alphabet", alphabet, "sequence alphabet");
    pretrain->add_flag("--per-context", per_context, "one parameter block per context");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "preference-optimize against the reference policy");
    add_common(train_cmd);
    add_run_flags(train_cmd);
    train_cmd->add_option("--data", data_path, "training dataset CSV")->required();
    train_cmd->add_option("--ref", ref_policy_path, "reference policy checkpoint")->required();
    train_cmd->add_option("--lambda", lambda_strs, "preference vector(s), e.g. 0.5,0.5; repeat for a grid");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "weighted importance sampling evaluation of checkpoints");
    add_common(eval_cmd);
    eval_cmd->add_option("--data", test_path, "test dataset CSV")->required();
    eval_cmd->add_option("--ref", ref_policy_path, "reference policy checkpoint")->required();
    eval_cmd->add_option("--run", run_dir, "training run directory")->required();
    eval_cmd->add_option("--ref-point", ref_str, "hypervolume reference, comma-separated");
    eval_cmd->add_flag("--conventional-wis", conventional_wis, "drop the inner 1/N_m factor");

    // ---- front ----
    auto* front_cmd = app.add_subcommand("front", "merge expected-reward tables into one Pareto front");
    add_common(front_cmd);
    front_cmd->add_option("--inputs", input_paths, "expected_rewards.csv files")->required();
    front_cmd->add_option("--ref-point", ref_str, "hypervolume reference, comma-separated");

    // ---- generate ----
    auto* gen_cmd = app.add_subcommand("generate", "sample sequences from a policy");
    add_common(gen_cmd);
    gen_cmd->add_option("--policy", policy_path, "policy checkpoint")->required();
    gen_cmd->add_option("--method", method, "gwg|topp")->required();
    gen_cmd->add_option("--context", context_id, "context id");
    gen_cmd->add_option("--wild-type", wild_type, "wild-type sequence (gwg)");
    gen_cmd->add_option("--trajectories", trajectories, "gwg trajectory count");
    gen_cmd->add_option("--steps", steps, "gwg steps per trajectory");
    gen_cmd->add_option("--max-mutations", max_mutations, "gwg mutation filter");
    gen_cmd->add_option("--proposal-temp", proposal_temp, "gwg proposal temperature");
    gen_cmd->add_option("--burn-in", burn_in, "gwg burn-in fraction");
    gen_cmd->add_option("--n", n_samples, "sample count (topp)");
    gen_cmd->add_option("--temperature", temperature, "sampling temperature (topp)");
    gen_cmd->add_option("--top-p", top_p, "nucleus mass (topp)");

    // ---- gp-fit ----
    auto* gpfit = app.add_subcommand("gp-fit", "fit per-objective GP reward models");
    add_common(gpfit);
    gpfit->add_option("--data", data_path, "dataset CSV")->required();
    gpfit->add_option("--restarts", restarts, "optimizer restarts");
    gpfit->add_option("--alphabet", alphabet, "sequence alphabet");

    // ---- gp-ehv ----
    auto* gpehv = app.add_subcommand("gp-ehv", "expected hypervolume of candidate subsets");
    add_common(gpehv);
    gpehv->add_option("--gp", gp_path, "gp.json from gp-fit")->required();
    gpehv->add_option("--candidates", candidates_path, "candidate sequences CSV (column 'sequence')")->required();
    gpehv->add_option("--k-sizes", k_sizes_str, "comma-separated subset sizes");
    gpehv->add_option("--qmc", n_qmc, "posterior samples per subset");
    gpehv->add_option("--repeats", repeats, "repeats per subset size");
    gpehv->add_option("--ref-point", ref_str, "reference, comma-separated");
    gpehv->add_option("--ref-data", test_path, "test CSV; reference = per-objective minimum");

    // ---- scalarize ----
    auto* scal = app.add_subcommand("scalarize", "dump per-item scalarized rewards");
    add_common(scal);
    scal->add_option("--data", data_path, "dataset CSV")->required();
    scal->add_option("--method", method, "linear|stz|st|hard-tcheby");
    scal->add_option("--lambda", lambda_strs, "preference vector");
    scal->add_option("--gamma", gamma_flag, "scalarization gamma");
    scal->add_option("--tau", tau_flag, "smoothing temperature");
    scal->add_option("--alphabet", alphabet, "sequence alphabet");

    // ---- report ----
    auto* report = app.add_subcommand("report", "summarize hypervolume.json files");
    add_common(report);
    report->add_option("--inputs", input_paths, "hypervolume.json files")->required();

    std::vector<std::string> args_copy = argv;  // CLI11 wants reversed argv
    std::reverse(args_copy.begin(), args_copy.end());
    app.parse(args_copy);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    const Vocabulary vocab{alphabet};

    if (synth->parsed()) {
        SyntheticSpec spec;
        spec.k = k_obj;
        spec.correlation = rho_target;
        spec.front = front_shape == "concave" ? FrontShape::Concave : FrontShape::Convex;
        spec.contexts = contexts;
        spec.items_per_context = items;
        spec.seq_len = seq_len;
        spec.alphabet = alphabet;
        spec.noise = noise;
        spec.holdout_fraction = holdout;
        spec.selection = test_selection == "compromise" ? TestSelection::Compromise : TestSelection::Random;
        spec.seed = common.seed;
        const SynthResult res = gen_landscape(spec);
        save_dataset(res.train, (out_dir / "train.csv").string());
        if (!res.test.groups.empty()) save_dataset(res.test, (out_dir / "test.csv").string());
        write_file(out_dir / "synth_spec.json", spec.to_json() + "\n");
        write_manifest(out_dir, "synth", argv, common.seed);
        return 0;
    }

    if (stats_cmd->parsed()) {
        const RewardDataset ds = load_dataset(data_path, vocab);
        const RewardStats st = compute_reward_stats(ds, gamma_flag);
        json j;
        j["gamma"] = st.gamma;
        j["sigma"] = std::vector<double>(st.sigma.data(), st.sigma.data() + st.sigma.size());
        j["mu"] = std::vector<double>(st.mu.data(), st.mu.data() + st.mu.size());
        j["lambda_bar"] = std::vector<double>(st.lambda_bar.data(), st.lambda_bar.data() + st.lambda_bar.size());
        json lz = json::array();
        for (Eigen::Index m = 0; m < st.log_partition.rows(); ++m) {
            json row;
            row["context_id"] = ds.groups[static_cast<std::size_t>(m)].context_id;
            row["log_partition"] = std::vector<double>(st.log_partition.row(m).begin(), st.log_partition.row(m).end());
            lz.push_back(std::move(row));
        }
        j["log_partition"] = std::move(lz);
        j["warnings"] = st.warnings;
        write_file(out_dir / "stats.json", j.dump(2) + "\n");
        write_manifest(out_dir, "stats", argv, common.seed);
        return 0;
    }

    if (pretrain->parsed()) {
        const RewardDataset ds = load_dataset(data_path, vocab);
        PretrainOptions opts;
        opts.epochs = epochs;
        opts.lr = lr;
        opts.per_context_blocks = per_context;
        const SequencePolicy pi0 = mle_pretrain(ds, opts);
        pi0.save((out_dir / "policy.json").string());
        json j;
        j["mean_nll"] = mean_nll(pi0, ds);
        write_file(out_dir / "pretrain_metrics.json", j.dump(2) + "\n");
        write_manifest(out_dir, "pretrain", argv, common.seed);
        return 0;
    }

    if (train_cmd->parsed()) {
        const SequencePolicy pi0 = SequencePolicy::load(ref_policy_path);
        const RewardDataset ds = load_dataset(data_path, pi0.vocab);
        RunConfig base_cfg = load_config_with_overrides(train_cmd, common);

        std::vector<Eigen::VectorXd> lambdas;
        for (const auto& s : lambda_strs) lambdas.push_back(parse_vector(s));
        if (lambdas.empty() && base_cfg.lambda.size() > 0) lambdas.push_back(base_cfg.lambda);
        if (lambdas.empty())
            lambdas.push_back(Eigen::VectorXd::Constant(ds.objective_count(), 1.0 / ds.objective_count()));

        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            RunConfig cfg = base_cfg;
            cfg.lambda = lambdas[li];
            cfg.validate();
            char sub[32];
            std::snprintf(sub, sizeof(sub), "run_%03d", static_cast<int>(li + 1));
            const fs::path rdir = out_dir / sub;
            fs::create_directories(rdir);
            write_file(rdir / "config.json", cfg.to_json() + "\n");

            const TrainResult res = train(cfg, ds, pi0, [&](const Checkpoint& ck) {
                json j;
                j["fraction"] = ck.fraction;
                char hash_buf[32];
                std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                              static_cast<unsigned long long>(ck.config_hash));
                j["config_hash"] = hash_buf;
                j["metrics"] = {{"step", ck.metrics.step},
                                {"loss", ck.metrics.loss},
                                {"pref_term", ck.metrics.pref_term},
                                {"nll_term", ck.metrics.nll_term},
                                {"lr", ck.metrics.lr}};
                j["policy"] = json::parse(ck.policy.to_json());
                write_file(rdir / ckpt_name(ck.fraction), j.dump() + "\n");
            });
            write_file(rdir / "metrics.csv", metrics_csv(res.metrics));
            write_manifest(rdir, "train", argv, cfg.seed, cfg.hash());
            if (res.diverged) throw std::runtime_error("train: loss diverged; kept checkpoints up to that point");
        }
        write_manifest(out_dir, "train", argv, base_cfg.seed, base_cfg.hash());
        return 0;
    }

    if (eval_cmd->parsed()) {
        const SequencePolicy pi0 = SequencePolicy::load(ref_policy_path);
        const RewardDataset testset = load_dataset(test_path, pi0.vocab);
        const RunConfig cfg = RunConfig::load((fs::path(run_dir) / "config.json").string());
        const std::string ltag =
            cfg.lambda.size() > 0
                ? lambda_tag(cfg.lambda)
                : lambda_tag(Eigen::VectorXd::Constant(testset.objective_count(), 1.0 / testset.objective_count()));

        std::vector<EvalRow> rows;
        for (double f : cfg.checkpoint_fractions) {
            const fs::path cpath = fs::path(run_dir) / ckpt_name(f);
            if (!fs::exists(cpath)) continue;
            std::ifstream in(cpath);
            json j;
            in >> j;
            const SequencePolicy pi = SequencePolicy::from_json_text(j.at("policy").dump());
            ExpectedReward er = wis_expected_rewards(pi, pi0, testset, conventional_wis || cfg.wis_conventional);
            EvalRow row;
            row.checkpoint = ckpt_name(f);
            row.lambda = ltag;
            row.values = er.values;
            row.ess_mean = er.ess.mean();
            row.ess_min = er.ess.minCoeff();
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw std::runtime_error("eval: no checkpoints found in '" + run_dir + "'");

        write_file(out_dir / "expected_rewards.csv", expected_rewards_csv(testset.objectives, rows));
        std::vector<Eigen::VectorXd> pts;
        for (const auto& r : rows) pts.push_back(r.values);
        const Eigen::VectorXd ref = ref_str.empty() ? default_reference(pts) : parse_vector(ref_str);
        write_front_outputs(out_dir, testset.objectives, rows, ref);
        write_manifest(out_dir, "eval", argv, common.seed, cfg.hash());
        return 0;
    }

    if (front_cmd->parsed()) {
        std::vector<EvalRow> rows;
        std::vector<std::string> objectives;
        for (const auto& p : input_paths) {
            std::vector<std::string> objs;
            auto part = read_expected_rewards_csv(p, objs);
            if (objectives.empty()) objectives = objs;
            else if (objectives != objs) throw std::runtime_error("front: objective mismatch between inputs");
            for (auto& r : part) {
                r.checkpoint = p + ":" + r.checkpoint;
                rows.push_back(std::move(r));
            }
        }
        if (rows.empty()) throw std::runtime_error("front: no rows in inputs");
        std::vector<Eigen::VectorXd> pts;
        for (const auto& r : rows) pts.push_back(r.values);
        const Eigen::VectorXd ref = ref_str.empty() ? default_reference(pts) : parse_vector(ref_str);
        write_front_outputs(out_dir, objectives, rows, ref);
        write_manifest(out_dir, "front", argv, common.seed);
        return 0;
    }

    if (gen_cmd->parsed()) {
        const SequencePolicy pi = SequencePolicy::load(policy_path);
        Rng rng(common.seed);
        std::string csv;
        if (method == "gwg") {
            if (wild_type.empty()) throw std::invalid_argument("generate: --wild-type required for gwg");
            GwgOptions opts;
            opts.n_trajectories = trajectories;
            opts.n_steps = steps;
            opts.max_mutations = max_mutations;
            opts.proposal_temp = proposal_temp;
            opts.burn_in_fraction = burn_in;
            const auto samples = run_trajectories(pi, context_id, pi.vocab.encode(wild_type), opts, rng);
            csv = "trajectory,step,sequence,energy,n_mutations\n";
            for (const auto& s : samples) {
                csv += std::to_string(s.trajectory) + ',' + std::to_string(s.step) + ',' + pi.vocab.decode(s.seq) +
                       ',' + fmt_g(s.energy) + ',' + std::to_string(s.n_mutations) + '\n';
            }
        } else if (method == "topp") {
            csv = "index,sequence,log_prob\n";
            for (int i = 0; i < n_samples; ++i) {
                const TokenSeq s = sample(pi, context_id, temperature, top_p, rng);
                csv += std::to_string(i) + ',' + pi.vocab.decode(s) + ',' + fmt_g(log_prob(pi, context_id, s)) + '\n';
            }
        } else {
            throw std::invalid_argument("generate: unknown method '" + method + "'");
        }
        write_file(out_dir / "sequences.csv", csv);
        write_manifest(out_dir, "generate", argv, common.seed);
        return 0;
    }

    if (gpfit->parsed()) {
        const RewardDataset ds = load_dataset(data_path, vocab);
        const FeatureMap fmap{ds.vocab, 2};
        std::vector<Eigen::VectorXd> feats;
        std::vector<Eigen::VectorXd> targets(static_cast<std::size_t>(ds.objective_count()));
        std::vector<double> tvals;
        for (int i = 0; i < ds.objective_count(); ++i) targets[static_cast<std::size_t>(i)].resize(ds.total_items());
        int idx = 0;
        for (const auto& g : ds.groups) {
            for (int n = 0; n < g.item_count(); ++n) {
                feats.push_back(fmap(g.sequences[static_cast<std::size_t>(n)]));
                for (int i = 0; i < ds.objective_count(); ++i) targets[static_cast<std::size_t>(i)][idx] = g.rewards(n, i);
                ++idx;
            }
        }
        Eigen::MatrixXd X(idx, fmap.dim());
        for (int n = 0; n < idx; ++n) X.row(n) = feats[static_cast<std::size_t>(n)].transpose();

        HyperPriors priors;
        priors.feature_dim = fmap.dim();
        Rng rng(common.seed);
        json jmodels = json::array();
        for (int i = 0; i < ds.objective_count(); ++i) {
            const GPModel m = fit_map(X, targets[static_cast<std::size_t>(i)], priors, restarts, rng);
            json jm;
            jm["objective"] = ds.objectives[static_cast<std::size_t>(i)];
            jm["mean"] = m.mean;
            jm["lengthscale"] = m.lengthscale;
            jm["signal_var"] = m.signal_var;
            jm["noise_var"] = m.noise_var;
            jmodels.push_back(std::move(jm));
        }
        json j;
        j["feature_map"] = {{"alphabet", ds.vocab.letters()}, {"kmax", 2}, {"dim", fmap.dim()}};
        j["training_data"] = {{"path", data_path}, {"rows", idx}};
        j["models"] = std::move(jmodels);
        write_file(out_dir / "gp.json", j.dump(2) + "\n");
        write_manifest(out_dir, "gp-fit", argv, common.seed);
        return 0;
    }

    if (gpehv->parsed()) {
        std::ifstream in(gp_path);
        if (!in) throw std::runtime_error("cannot open '" + gp_path + "'");
        json jgp;
        in >> jgp;
        const Vocabulary gvocab(jgp.at("feature_map").at("alphabet").get<std::string>());
        const FeatureMap fmap{gvocab, jgp.at("feature_map").at("kmax").get<int>()};
        const std::string train_path = jgp.at("training_data").at("path").get<std::string>();
        const RewardDataset train_ds = load_dataset(train_path, gvocab);

        std::vector<GPModel> models;
        int oi = 0;
        for (const auto& jm : jgp.at("models")) {
            Eigen::VectorXd y(train_ds.total_items());
            Eigen::MatrixXd X(train_ds.total_items(), fmap.dim());
            int idx = 0;
            for (const auto& g : train_ds.groups) {
                for (int n = 0; n < g.item_count(); ++n) {
                    X.row(idx) = fmap(g.sequences[static_cast<std::size_t>(n)]).transpose();
                    y[idx] = g.rewards(n, oi);
                    ++idx;
                }
            }
            models.push_back(make_gp(X, y, jm.at("mean").get<double>(), jm.at("lengthscale").get<double>(),
                                     jm.at("signal_var").get<double>(), jm.at("noise_var").get<double>()));
            ++oi;
        }

        // candidate sequences: any CSV with a 'sequence' column
        std::ifstream cin(candidates_path);
        if (!cin) throw std::runtime_error("cannot open '" + candidates_path + "'");
        std::string line;
        if (!std::getline(cin, line)) throw std::runtime_error("empty candidates file");
        std::vector<std::string> header;
        {
            std::stringstream ss(line);
            std::string tok;
            while (std::getline(ss, tok, ',')) header.push_back(tok);
        }
        const auto sit = std::find(header.begin(), header.end(), "sequence");
        if (sit == header.end()) throw std::runtime_error("candidates: no 'sequence' column");
        const int scol = static_cast<int>(sit - header.begin());
        std::vector<Eigen::VectorXd> cand_feats;
        while (std::getline(cin, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string tok;
            int col = 0;
            std::string seq;
            while (std::getline(ss, tok, ',')) {
                if (col == scol) seq = tok;
                ++col;
            }
            if (!seq.empty()) cand_feats.push_back(fmap(gvocab.encode(seq)));
        }

        Eigen::VectorXd ref;
        if (!ref_str.empty()) {
            ref = parse_vector(ref_str);
        } else if (!test_path.empty()) {
            const RewardDataset testset = load_dataset(test_path, gvocab);
            ref.resize(testset.objective_count());
            for (int i = 0; i < testset.objective_count(); ++i) {
                double lo = std::numeric_limits<double>::infinity();
                for (const auto& g : testset.groups) lo = std::min(lo, g.rewards.col(i).minCoeff());
                ref[i] = lo;
            }
        } else {
            throw std::invalid_argument("gp-ehv: provide --ref-point or --ref-data");
        }

        EhvOptions opts;
        opts.n_qmc = n_qmc;
        opts.n_repeats = repeats;
        if (!k_sizes_str.empty()) {
            const Eigen::VectorXd ks = parse_vector(k_sizes_str);
            opts.subset_sizes.assign(ks.data(), ks.data() + ks.size());
            for (double v : opts.subset_sizes) {
                if (v < 1) throw std::invalid_argument("gp-ehv: subset sizes must be >= 1");
            }
        }
        Rng rng(common.seed);
        const auto rows = expected_hypervolume(models, cand_feats, opts, ref, rng);
        std::string csv = "k,mean,std\n";
        for (const auto& r : rows)
            csv += std::to_string(r.subset_size) + ',' + fmt_g(r.mean) + ',' + fmt_g(r.stddev) + '\n';
        write_file(out_dir / "ehv.csv", csv);
        json jm;
        jm["n_qmc"] = opts.n_qmc;
        jm["n_repeats"] = opts.n_repeats;
        jm["subset_sizes"] = opts.subset_sizes;
        jm["reference"] = std::vector<double>(ref.data(), ref.data() + ref.size());
        jm["candidates"] = static_cast<int>(cand_feats.size());
        write_file(out_dir / "ehv_meta.json", jm.dump(2) + "\n");
        write_manifest(out_dir, "gp-ehv", argv, common.seed);
        return 0;
    }

    if (scal->parsed()) {
        const RewardDataset ds = load_dataset(data_path, vocab);
        const RewardStats st = compute_reward_stats(ds, gamma_flag);
        Eigen::VectorXd lam = lambda_strs.empty()
                                  ? Eigen::VectorXd::Constant(ds.objective_count(), 1.0 / ds.objective_count())
                                  : parse_vector(lambda_strs.front());
        const PreferenceVector lambda = PreferenceVector::normalized(lam);
        ScalarizeMethod meth = ScalarizeMethod::St;
        if (method == "linear") meth = ScalarizeMethod::Linear;
        else if (method == "stz") meth = ScalarizeMethod::Stz;
        else if (method == "hard-tcheby") meth = ScalarizeMethod::HardTcheby;
        else if (method != "st") throw std::invalid_argument("scalarize: unknown method '" + method + "'");

        std::string csv = "context_id,item,sequence";
        for (const auto& o : ds.objectives) csv += ",r:" + o;
        for (const auto& o : ds.objectives) csv += ",rho:" + o;
        csv += ",value\n";
        for (int m = 0; m < ds.group_count(); ++m) {
            const auto& g = ds.groups[static_cast<std::size_t>(m)];
            const Eigen::VectorXd vals = group_scores(g, m, meth, lambda, st, gamma_flag, tau_flag);
            for (int n = 0; n < g.item_count(); ++n) {
                const Eigen::VectorXd rv = rho(g.rewards.row(n).transpose(), m, st);
                csv += g.context_id + ',' + std::to_string(n) + ',' + ds.vocab.decode(g.sequences[static_cast<std::size_t>(n)]);
                for (int i = 0; i < ds.objective_count(); ++i) csv += ',' + fmt_g(g.rewards(n, i));
                for (int i = 0; i < ds.objective_count(); ++i) csv += ',' + fmt_g(rv[i]);
                csv += ',' + fmt_g(vals[n]) + '\n';
            }
        }
        write_file(out_dir / "scalarized.csv", csv);
        write_manifest(out_dir, "scalarize", argv, common.seed);
        return 0;
    }

    if (report->parsed()) {
        std::string csv = "input,hypervolume,front_size\n";
        for (const auto& p : input_paths) {
            std::ifstream in(p);
            if (!in) throw std::runtime_error("cannot open '" + p + "'");
            json j;
            in >> j;
            csv += p + ',' + fmt_g(j.at("hypervolume").get<double>()) + ',' +
                   std::to_string(j.at("front").size()) + '\n';
        }
        write_file(out_dir / "report.csv", csv);
        std::cout << csv;
        write_manifest(out_dir, "report", argv, common.seed);
        return 0;
    }

    return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& argv) {
    try {
        return run_impl(argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace tcheby
