// rwbench: grab-and-lift state-representation benchmark CLI.

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "rw/config.hpp"
#include "rw/dataset.hpp"
#include "rw/errors.hpp"
#include "rw/harness.hpp"
#include "rw/reward_model.hpp"
#include "rw/rl.hpp"
#include "rw/state_repr.hpp"

namespace {

using namespace rw;

harness::ExperimentConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return config::load_experiment_config(path);
}

state::PcaBasis* maybe_load_pca(const std::string& path, std::optional<state::PcaBasis>& slot) {
    if (path.empty()) return nullptr;
    slot = state::load_pca(path);
    return &*slot;
}

// Train sessions flattened into one matrix for PCA fitting.
Eigen::MatrixXd train_matrix(const std::vector<data::CaptureSession>& train) {
    std::size_t n = 0;
    for (const auto& s : train) n += s.images.size();
    if (n == 0) throw UsageError("fit-pca: empty training partition");
    Eigen::MatrixXd m(n, train[0].images[0].image.size());
    Eigen::Index r = 0;
    for (const auto& s : train)
        for (const auto& li : s.images) m.row(r++) = li.image.pixels.transpose();
    return m;
}

int cmd_gen_data(const std::string& config_path, const std::string& out, int n_sessions,
                 int n_success, int n_nonsuccess, std::uint64_t seed) {
    auto cfg = load_config_or_default(config_path);
    std::vector<data::CaptureSession> sessions;
    for (int i = 0; i < n_sessions; ++i) {
        sessions.push_back(data::generate_session(cfg.env, i, seed, n_success, n_nonsuccess));
        std::cout << "session " << i << ": " << sessions.back().images.size() << " images\n";
    }
    data::save_dataset(out, sessions);
    std::cout << "wrote " << out << " ("
              << std::filesystem::file_size(out) << " bytes)\n";
    return 0;
}

int cmd_train_classifier(const std::string& data_path, const std::string& out, int epochs,
                         int batch, std::uint64_t seed, bool sweep) {
    auto split = data::split_sessions(data::load_dataset(data_path));

    reward::Classifier best_clf;
    reward::TrainReport best_report;
    double best_val = -1.0;
    std::vector<std::pair<int, int>> grid;
    if (sweep) {
        for (int e : {5, 10})
            for (int b : {16, 32, 64}) grid.push_back({e, b});
    } else {
        grid.push_back({epochs, batch});
    }
    for (auto [e, b] : grid) {
        auto [clf, report] = reward::train_classifier(split, e, b, seed);
        const double val = report.val_accuracy[report.best_epoch];
        std::cout << "epochs=" << e << " batch=" << b << " val_acc=" << val
                  << " test_acc=" << report.test_accuracy << "\n";
        if (val > best_val) {
            best_val = val;
            best_clf = std::move(clf);
            best_report = std::move(report);
        }
    }
    reward::save_classifier(out, best_clf);
    std::cout << "selected epochs=" << best_report.epochs << " batch=" << best_report.batch_size
              << " best_epoch=" << best_report.best_epoch
              << " test_accuracy=" << best_report.test_accuracy << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_eval_classifier(const std::string& model, const std::string& data_path) {
    auto clf = reward::load_classifier(model);
    auto sessions = data::load_dataset(data_path);
    auto split = data::split_sessions(sessions);
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& s : sessions)
        std::cout << "session " << s.session_id << ": accuracy "
                  << reward::evaluate_accuracy(clf, s) << "\n";
    std::cout << "test partition: accuracy " << reward::evaluate_accuracy(clf, split.test)
              << "\n";
    return 0;
}

int cmd_fit_pca(const std::string& data_path, const std::string& out, int k) {
    auto split = data::split_sessions(data::load_dataset(data_path));
    auto basis = state::fit_pca(train_matrix(split.train), k);
    state::save_pca(out, basis);
    std::cout << "wrote " << out << " (k=" << basis.k() << ", dim=" << basis.dim() << ")\n";
    return 0;
}

int cmd_train_policy(const std::string& config_path, const std::string& classifier_path,
                     const std::string& pca_path, const std::string& spec_str,
                     const std::string& algo_str, long steps, std::uint64_t seed,
                     const std::string& out) {
    auto cfg = load_config_or_default(config_path);
    if (!spec_str.empty()) cfg.spec = state::parse_state_spec(spec_str);
    if (!algo_str.empty()) cfg.algo = rl::parse_algo(algo_str);
    if (steps > 0) cfg.train_steps = steps;
    auto clf = reward::load_classifier(classifier_path);
    std::optional<state::PcaBasis> pca;
    auto* basis = maybe_load_pca(pca_path, pca);

    auto trained = harness::train_policy(cfg, clf, basis, seed);
    rl::save_policy(out, trained.agent, cfg.spec);
    int successes = 0;
    for (const auto& log : trained.curve) successes += log.success ? 1 : 0;
    std::cout << "trained " << rl::algo_name(cfg.algo) << " on " << cfg.spec.str() << ": "
              << trained.env_steps << " env steps, " << trained.curve.size()
              << " episodes, " << successes << " training successes\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_eval_policy(const std::string& config_path, const std::string& classifier_path,
                    const std::string& pca_path, const std::string& policy_path,
                    std::uint64_t seed, long steps, const std::string& out_dir) {
    auto cfg = load_config_or_default(config_path);
    auto [agent, spec] = rl::load_policy(policy_path);
    cfg.spec = spec;
    cfg.algo = agent.algo;
    if (steps > 0) cfg.eval_steps = steps;
    auto clf = reward::load_classifier(classifier_path);
    std::optional<state::PcaBasis> pca;
    auto* basis = maybe_load_pca(pca_path, pca);

    auto metrics = harness::evaluate_policy(agent, cfg, clf, basis, seed);
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "episodes: " << metrics.episodes << "\n";
    std::cout << "avg_reward: " << metrics.avg_reward << "\n";
    std::cout << "task_success_pct: " << metrics.task_success_pct << "\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        harness::write_episode_jsonl(out_dir + "/episodes.jsonl", spec.str(),
                                     rl::algo_name(agent.algo), seed, metrics.logs, false);
        std::cout << "wrote " << out_dir << "/episodes.jsonl\n";
    }
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& classifier_path,
                const std::string& pca_path, const std::string& specs_str,
                const std::string& algos_str, int n_seeds, std::uint64_t seed, long steps,
                const std::string& out_dir, int workers) {
    auto cfg = load_config_or_default(config_path);
    if (steps > 0) cfg.train_steps = steps;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (n_seeds > 0) cfg.n_seeds = n_seeds;

    std::vector<state::StateSpec> specs;
    {
        std::stringstream ss(specs_str);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) specs.push_back(state::parse_state_spec(item));
    }
    if (specs.empty()) throw UsageError("compare: no state specs given");
    std::vector<rl::Algo> algos;
    {
        std::stringstream ss(algos_str);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) algos.push_back(rl::parse_algo(item));
    }
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < cfg.n_seeds; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));

    auto clf = reward::load_classifier(classifier_path);
    std::optional<state::PcaBasis> pca;
    auto* basis = maybe_load_pca(pca_path, pca);
    bool needs_pca = false;
    for (const auto& s : specs) needs_pca |= s.variant == state::Variant::PcaImage;
    if (needs_pca && !basis) throw UsageError("compare: pca spec requested but no --pca basis");

    auto results = harness::compare_representations(cfg, specs, algos, seeds, clf, basis, workers);
    std::ifstream summary(cfg.out_dir + "/summary.txt");
    std::cout << summary.rdbuf();
    std::cout << "wrote " << cfg.out_dir << "/results.csv\n";
    return 0;
}

int cmd_replay(const std::string& config_path, const std::string& classifier_path,
               const std::string& pca_path, const std::string& policy_path,
               std::uint64_t seed) {
    auto cfg = load_config_or_default(config_path);
    auto clf = reward::load_classifier(classifier_path);
    std::optional<state::PcaBasis> pca;
    auto* basis = maybe_load_pca(pca_path, pca);

    harness::Actor actor;
    std::mt19937_64 rng(seed);
    std::optional<rl::Agent> agent;
    if (!policy_path.empty()) {
        auto [ag, spec] = rl::load_policy(policy_path);
        agent = std::move(ag);
        cfg.spec = spec;
        actor.agent = &*agent;
        actor.rng = &rng;
        actor.hp = &cfg.hp;
    }
    auto ep = harness::run_episode(cfg.env, actor, clf, cfg.spec, basis, seed);
    std::cout << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < ep.log.rewards.size(); ++i)
        std::cout << "r" << (i + 1) << "=" << ep.log.rewards[i] << "\n";
    std::cout << (ep.log.success ? "success" : "failure") << " in " << ep.log.length
              << " steps, cumulative reward " << ep.log.cum_reward << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grab-and-lift state-representation benchmark"};
    app.require_subcommand(1);

    std::string config_path, out, data_path, model_path, pca_path, policy_path, out_dir;
    std::string spec_str, algo_str = "", specs_str = "rewards:15,pca:50", algos_str = "ddpg,td3";
    int n_sessions = 10, n_success = 200, n_nonsuccess = 440;
    int epochs = 10, batch = 32, k = 50, n_seeds = 0, workers = 0;
    long steps = 0;
    std::uint64_t seed = 0;
    bool sweep = false;

    auto* gen = app.add_subcommand("gen-data", "generate labeled capture sessions");
    gen->add_option("--config", config_path, "experiment config file");
    gen->add_option("--out", out, "output dataset (.rwds)")->required();
    gen->add_option("--sessions", n_sessions, "number of capture sessions");
    gen->add_option("--success", n_success, "success images per session");
    gen->add_option("--nonsuccess", n_nonsuccess, "non-success images per session");
    gen->add_option("--seed", seed, "generation seed");

    auto* tc = app.add_subcommand("train-classifier", "train the success classifier");
    tc->add_option("--data", data_path, "dataset file")->required();
    tc->add_option("--out", out, "output model (.rwcl)")->required();
    tc->add_option("--epochs", epochs, "training epochs");
    tc->add_option("--batch", batch, "minibatch size");
    tc->add_option("--seed", seed, "training seed");
    tc->add_flag("--sweep", sweep, "sweep epochs {5,10} x batch {16,32,64}");

    auto* ec = app.add_subcommand("eval-classifier", "report classifier accuracy");
    ec->add_option("--model", model_path, "classifier model")->required();
    ec->add_option("--data", data_path, "dataset file")->required();

    auto* fp = app.add_subcommand("fit-pca", "fit a PCA basis on the training sessions");
    fp->add_option("--data", data_path, "dataset file")->required();
    fp->add_option("--out", out, "output basis (.rwpc)")->required();
    fp->add_option("--k", k, "number of components");

    auto* tp = app.add_subcommand("train-policy", "train one policy");
    tp->add_option("--config", config_path, "experiment config file");
    tp->add_option("--classifier", model_path, "classifier model")->required();
    tp->add_option("--pca", pca_path, "PCA basis (for pca specs)");
    tp->add_option("--spec", spec_str, "state spec (pixels:WxH | pca:K | rewards:N)");
    tp->add_option("--algo", algo_str, "ddpg or td3");
    tp->add_option("--steps", steps, "training env steps");
    tp->add_option("--seed", seed, "training seed");
    tp->add_option("--out", out, "output policy (.rwpl)")->required();

    auto* ep = app.add_subcommand("eval-policy", "evaluate a trained policy");
    ep->add_option("--config", config_path, "experiment config file");
    ep->add_option("--classifier", model_path, "classifier model")->required();
    ep->add_option("--pca", pca_path, "PCA basis");
    ep->add_option("--policy", policy_path, "policy file")->required();
    ep->add_option("--steps", steps, "evaluation env steps");
    ep->add_option("--seed", seed, "evaluation seed");
    ep->add_option("--out-dir", out_dir, "directory for episodes.jsonl");

    auto* cp = app.add_subcommand("compare", "compare state representations");
    cp->add_option("--config", config_path, "experiment config file");
    cp->add_option("--classifier", model_path, "classifier model")->required();
    cp->add_option("--pca", pca_path, "PCA basis");
    cp->add_option("--specs", specs_str, "comma-separated state specs");
    cp->add_option("--algos", algos_str, "comma-separated algorithms");
    cp->add_option("--seeds", n_seeds, "seeds per cell");
    cp->add_option("--seed", seed, "base seed");
    cp->add_option("--steps", steps, "training env steps per cell");
    cp->add_option("--out-dir", out_dir, "output directory");
    cp->add_option("--workers", workers, "worker pool size (0 = hardware)");

    auto* rp = app.add_subcommand("replay", "dump per-step rewards of one episode");
    rp->add_option("--config", config_path, "experiment config file");
    rp->add_option("--classifier", model_path, "classifier model")->required();
    rp->add_option("--pca", pca_path, "PCA basis");
    rp->add_option("--policy", policy_path, "policy file (omit for the scripted expert)");
    rp->add_option("--seed", seed, "episode seed");

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return cmd_gen_data(config_path, out, n_sessions, n_success, n_nonsuccess, seed);
        if (tc->parsed()) return cmd_train_classifier(data_path, out, epochs, batch, seed, sweep);
        if (ec->parsed()) return cmd_eval_classifier(model_path, data_path);
        if (fp->parsed()) return cmd_fit_pca(data_path, out, k);
        if (tp->parsed())
            return cmd_train_policy(config_path, model_path, pca_path, spec_str, algo_str,
                                    steps, seed, out);
        if (ep->parsed())
            return cmd_eval_policy(config_path, model_path, pca_path, policy_path, seed, steps,
                                   out_dir);
        if (cp->parsed())
            return cmd_compare(config_path, model_path, pca_path, specs_str, algos_str,
                               n_seeds, seed, steps, out_dir, workers);
        if (rp->parsed()) return cmd_replay(config_path, model_path, pca_path, policy_path, seed);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const rw::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}
