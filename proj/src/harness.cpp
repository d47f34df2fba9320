#include "rw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rw/errors.hpp"

namespace rw::harness {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// The classifier may run at a lower resolution than the camera; block-mean
// downsampling bridges the two (dimensions must divide evenly).
double reward_of(const reward::Classifier& clf, const Image& obs) {
    if (obs.width == clf.width && obs.height == clf.height)
        return reward::predict_success(clf, obs);
    return reward::predict_success(clf, state::downsample(obs, clf.width, clf.height));
}

}  // namespace

EpisodeResult run_episode(const sim::EnvConfig& env, const Actor& actor,
                          const reward::Classifier& clf, const state::StateSpec& spec,
                          const state::PcaBasis* basis, std::uint64_t episode_seed,
                          long budget) {
    if (actor.agent && !actor.rng)
        throw ContractError("run_episode: agent actor needs an RNG stream");

    EpisodeResult result;
    result.log.seed = episode_seed;

    sim::WorldState world = sim::reset(env, episode_seed);
    state::RewardWindowBuffer window(spec.n);

    Image obs = sim::render(world, env);
    double reward = reward_of(clf, obs);
    if (spec.variant == state::Variant::RewardWindow) window.push_and_encode(reward);
    Eigen::VectorXd state = state::encode(spec, obs, &window, basis);

    bool success = false;
    long taken = 0;
    while (!world.done) {
        if (budget >= 0 && taken >= budget) {
            result.log.truncated = true;
            break;
        }
        Eigen::Vector4d action;
        if (actor.agent) {
            // hp only matters for noise scales here; defaults carry them via caller.
            action = rl::select_action(*actor.agent, state, actor.explore, *actor.rng,
                                       actor.hp ? *actor.hp : rl::HyperParams{}, actor.warmup);
        } else {
            action = sim::scripted_expert(world, env);
        }
        auto [next_world, step_res] = sim::step(world, action, env);
        world = std::move(next_world);
        ++taken;

        double next_reward = reward_of(clf, step_res.observation);
        if (spec.variant == state::Variant::RewardWindow) window.push_and_encode(next_reward);
        Eigen::VectorXd next_state = state::encode(spec, step_res.observation, &window, basis);

        result.transitions.push_back(
            {state, action, next_reward, next_state, step_res.done});
        result.log.rewards.push_back(next_reward);
        result.log.cum_reward += next_reward;
        state = std::move(next_state);
        success = step_res.ground_truth_success;
    }
    result.log.length = static_cast<int>(taken);
    result.log.success = success;
    return result;
}

TrainResult train_policy(const ExperimentConfig& config, const reward::Classifier& clf,
                         const state::PcaBasis* basis, std::uint64_t seed) {
    config.hp.validate();
    const state::StateSpec& spec = config.spec;
    TrainResult out;
    out.agent = rl::make_agent(config.algo, spec.dim(), config.hp, mix_seed(seed, 0xAC));
    rl::ReplayBuffer buffer(config.hp.buffer_capacity, mix_seed(seed, 0xBF));
    std::mt19937_64 action_rng(mix_seed(seed, 0xAE));
    std::mt19937_64 noise_rng(mix_seed(seed, 0x7D));

    long steps = 0;
    int episode_index = 0;
    while (steps < config.train_steps) {
        sim::WorldState world = sim::reset(config.env, mix_seed(seed, 0xE0 + episode_index));
        state::RewardWindowBuffer window(spec.n);
        Image obs = sim::render(world, config.env);
        double reward = reward_of(clf, obs);
        if (spec.variant == state::Variant::RewardWindow) window.push_and_encode(reward);
        Eigen::VectorXd state = state::encode(spec, obs, &window, basis);

        EpisodeLog log;
        log.index = episode_index;
        log.seed = mix_seed(seed, 0xE0 + episode_index);
        bool success = false;
        bool truncated = false;
        while (!world.done) {
            if (steps >= config.train_steps) {
                truncated = true;
                break;
            }
            const bool warmup = steps < config.hp.warmup_steps;
            Eigen::Vector4d action =
                rl::select_action(out.agent, state, /*explore=*/true, action_rng, config.hp, warmup);
            auto [next_world, step_res] = sim::step(world, action, config.env);
            world = std::move(next_world);
            ++steps;

            double next_reward = reward_of(clf, step_res.observation);
            if (spec.variant == state::Variant::RewardWindow)
                window.push_and_encode(next_reward);
            Eigen::VectorXd next_state =
                state::encode(spec, step_res.observation, &window, basis);
            buffer.push({state, action, next_reward, next_state, step_res.done});
            log.rewards.push_back(next_reward);
            log.cum_reward += next_reward;
            state = std::move(next_state);
            success = step_res.ground_truth_success;

            if (steps > config.hp.warmup_steps &&
                buffer.size() >= static_cast<std::size_t>(config.hp.batch)) {
                auto batch = buffer.sample(static_cast<std::size_t>(config.hp.batch));
                if (config.algo == rl::Algo::DDPG)
                    rl::ddpg_update(out.agent, batch, config.hp);
                else
                    rl::td3_update(out.agent, batch, config.hp, out.agent.update_count,
                                   noise_rng);
            }
        }
        log.length = static_cast<int>(log.rewards.size());
        log.success = success;
        log.truncated = truncated;
        if (!truncated) out.curve.push_back(std::move(log));  // curve = completed episodes
        ++episode_index;
    }
    out.env_steps = steps;
    return out;
}

EvalMetrics evaluate_policy(const rl::Agent& agent, const ExperimentConfig& config,
                            const reward::Classifier& clf, const state::PcaBasis* basis,
                            std::uint64_t seed) {
    if (agent.state_dim != config.spec.dim())
        throw ContractError("evaluate_policy: agent state dim does not match spec");
    std::mt19937_64 rng(mix_seed(seed, 0xEA));
    Actor actor;
    actor.agent = &agent;
    actor.explore = false;
    actor.rng = &rng;
    actor.hp = &config.hp;

    EvalMetrics metrics;
    long steps = 0;
    int episode_index = 0;
    while (steps < config.eval_steps) {
        const long budget = config.eval_steps - steps;
        EpisodeResult ep = run_episode(config.env, actor, clf, config.spec, basis,
                                       mix_seed(seed, 0xF0 + episode_index), budget);
        steps += ep.log.length;
        ep.log.index = episode_index;
        ++episode_index;
        if (ep.log.truncated) break;  // partial episode: excluded from statistics
        metrics.logs.push_back(std::move(ep.log));
    }
    if (metrics.logs.empty())
        throw ContractError("evaluate_policy: eval budget too small for a single episode");

    metrics.episodes = static_cast<int>(metrics.logs.size());
    double reward_sum = 0.0;
    int successes = 0;
    for (const auto& log : metrics.logs) {
        reward_sum += log.cum_reward;
        successes += log.success ? 1 : 0;
    }
    metrics.avg_reward = reward_sum / metrics.episodes;
    metrics.task_success_pct = 100.0 * successes / metrics.episodes;
    return metrics;
}

namespace {

struct Cell {
    state::StateSpec spec;
    rl::Algo algo;
    std::uint64_t seed;
};

}  // namespace

CompareResults compare_representations(const ExperimentConfig& base,
                                       const std::vector<state::StateSpec>& specs,
                                       const std::vector<rl::Algo>& algos,
                                       const std::vector<std::uint64_t>& seeds,
                                       const reward::Classifier& clf,
                                       const state::PcaBasis* basis, int max_workers) {
    std::vector<Cell> cells;
    for (const auto& spec : specs)
        for (const auto algo : algos)
            for (const auto seed : seeds) cells.push_back({spec, algo, seed});

    std::vector<CellResult> results(cells.size());
    std::vector<std::vector<EpisodeLog>> eval_logs(cells.size());

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_workers =
        std::min<std::size_t>(cells.size(), max_workers > 0 ? max_workers : hw);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            CellResult& r = results[i];
            r.spec = cell.spec.str();
            r.algo = rl::algo_name(cell.algo);
            r.seed = cell.seed;
            r.train_steps = base.train_steps;
            try {
                ExperimentConfig cfg = base;
                cfg.spec = cell.spec;
                cfg.algo = cell.algo;
                TrainResult trained = train_policy(cfg, clf, basis, cell.seed);
                EvalMetrics metrics =
                    evaluate_policy(trained.agent, cfg, clf, basis, mix_seed(cell.seed, 0x5E));
                r.avg_reward = metrics.avg_reward;
                r.task_success_pct = metrics.task_success_pct;
                r.episodes = metrics.episodes;
                eval_logs[i] = std::move(metrics.logs);

                // Aggregates must be recomputable from the per-episode logs.
                double reward_sum = 0.0;
                int successes = 0;
                for (const auto& log : eval_logs[i]) {
                    reward_sum += log.cum_reward;
                    successes += log.success ? 1 : 0;
                }
                if (reward_sum / metrics.episodes != metrics.avg_reward ||
                    100.0 * successes / metrics.episodes != metrics.task_success_pct)
                    throw NumericError("metrics do not recompute from episode logs");
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    CompareResults out;
    out.cells = std::move(results);

    // Per (spec, algo) summary: best over seeds plus mean +- sd.
    std::map<std::pair<std::string, std::string>, std::vector<const CellResult*>> groups;
    for (const auto& c : out.cells)
        if (c.error.empty()) groups[{c.spec, c.algo}].push_back(&c);
    for (const auto& [key, group] : groups) {
        SummaryRow row;
        row.spec = key.first;
        row.algo = key.second;
        double s_sum = 0.0, s_sq = 0.0, r_sum = 0.0, r_sq = 0.0;
        for (const auto* c : group) {
            row.best_success = std::max(row.best_success, c->task_success_pct);
            row.best_reward = std::max(row.best_reward, c->avg_reward);
            s_sum += c->task_success_pct;
            s_sq += c->task_success_pct * c->task_success_pct;
            r_sum += c->avg_reward;
            r_sq += c->avg_reward * c->avg_reward;
        }
        const double n = static_cast<double>(group.size());
        row.mean_success = s_sum / n;
        row.sd_success = std::sqrt(std::max(0.0, s_sq / n - row.mean_success * row.mean_success));
        row.mean_reward = r_sum / n;
        row.sd_reward = std::sqrt(std::max(0.0, r_sq / n - row.mean_reward * row.mean_reward));
        out.summary.push_back(std::move(row));
    }

    if (!base.out_dir.empty()) {
        std::filesystem::create_directories(base.out_dir);
        write_csv(base.out_dir + "/results.csv", out.cells);
        write_summary(base.out_dir + "/summary.txt", out);
        const std::string jsonl = base.out_dir + "/episodes.jsonl";
        std::error_code ec;
        std::filesystem::remove(jsonl, ec);
        for (std::size_t i = 0; i < cells.size(); ++i)
            write_episode_jsonl(jsonl, out.cells[i].spec, out.cells[i].algo,
                                out.cells[i].seed, eval_logs[i], /*append=*/true);
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<CellResult>& cells) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot write " + path);
    os << "# avg_reward = mean per-episode cumulative predicted reward\n";
    os << "spec,algorithm,seed,avg_reward,task_success_pct,episodes,train_steps\n";
    os << std::setprecision(10);
    for (const auto& c : cells) {
        if (!c.error.empty()) {
            os << c.spec << "," << c.algo << "," << c.seed << ",nan,nan,0," << c.train_steps
               << "\n";
            continue;
        }
        os << c.spec << "," << c.algo << "," << c.seed << "," << c.avg_reward << ","
           << c.task_success_pct << "," << c.episodes << "," << c.train_steps << "\n";
    }
}

void write_summary(const std::string& path, const CompareResults& results) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot write " + path);
    os << "State representation comparison (best over seeds; mean +- sd in brackets)\n";
    os << std::fixed << std::setprecision(2);
    os << std::left << std::setw(18) << "State" << std::setw(6) << "Algo" << std::setw(26)
       << "Avg. Reward" << std::setw(26) << "Avg. Task Success (%)" << "\n";
    for (const auto& row : results.summary) {
        std::ostringstream rs, ss;
        rs << std::fixed << std::setprecision(3) << row.best_reward << " [" << row.mean_reward
           << " +- " << row.sd_reward << "]";
        ss << std::fixed << std::setprecision(2) << row.best_success << " [" << row.mean_success
           << " +- " << row.sd_success << "]";
        os << std::left << std::setw(18) << row.spec << std::setw(6) << row.algo
           << std::setw(26) << rs.str() << std::setw(26) << ss.str() << "\n";
    }
    for (const auto& c : results.cells)
        if (!c.error.empty())
            os << "FAILED " << c.spec << " " << c.algo << " seed " << c.seed << ": " << c.error
               << "\n";
}

void write_episode_jsonl(const std::string& path, const std::string& spec,
                         const std::string& algo, std::uint64_t seed,
                         const std::vector<EpisodeLog>& logs, bool append) {
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw UsageError("cannot write " + path);
    for (const auto& log : logs) {
        nlohmann::json j;
        j["spec"] = spec;
        j["algorithm"] = algo;
        j["seed"] = seed;
        j["episode"] = log.index;
        j["episode_seed"] = log.seed;
        j["length"] = log.length;
        j["cumulative_reward"] = log.cum_reward;
        j["success"] = log.success;
        j["rewards"] = log.rewards;
        os << j.dump() << "\n";
    }
}

}  // namespace rw::harness
