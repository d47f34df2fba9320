#pragma once

// End-to-end experiment orchestration: episode loop, policy training and
// evaluation, and the representation-comparison grid.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rw/reward_model.hpp"
#include "rw/rl.hpp"
#include "rw/sim_env.hpp"
#include "rw/state_repr.hpp"

namespace rw::harness {

struct ExperimentConfig {
    sim::EnvConfig env;
    state::StateSpec spec = state::StateSpec::reward_window(15);
    rl::Algo algo = rl::Algo::DDPG;
    rl::HyperParams hp;
    long train_steps = 10000;
    long eval_steps = 10000;
    int n_seeds = 5;
    std::string out_dir = "out";
};

struct EpisodeLog {
    int index = 0;
    std::uint64_t seed = 0;
    int length = 0;
    double cum_reward = 0.0;
    bool success = false;
    bool truncated = false;  // cut by a step budget, not a task outcome
    std::vector<double> rewards;
};

struct EvalMetrics {
    double avg_reward = 0.0;       // mean per-episode cumulative reward
    double task_success_pct = 0.0;  // 100 * successes / completed episodes
    int episodes = 0;
    std::vector<EpisodeLog> logs;
};

// What drives the action selection inside an episode.
struct Actor {
    const rl::Agent* agent = nullptr;  // nullptr = scripted expert
    bool explore = false;
    bool warmup = false;
    std::mt19937_64* rng = nullptr;          // required when agent is set
    const rl::HyperParams* hp = nullptr;     // noise scales; defaults when null
};

struct EpisodeResult {
    std::vector<rl::Transition> transitions;
    EpisodeLog log;
};

// One episode of the Figure-style agent cycle: render, predict reward, encode
// state, act. `budget` caps the env steps taken (<0 = unlimited up to the env
// cap); episodes cut by the budget are marked truncated.
EpisodeResult run_episode(const sim::EnvConfig& env, const Actor& actor,
                          const reward::Classifier& clf, const state::StateSpec& spec,
                          const state::PcaBasis* basis, std::uint64_t episode_seed,
                          long budget = -1);

struct TrainResult {
    rl::Agent agent;
    std::vector<EpisodeLog> curve;  // completed training episodes
    long env_steps = 0;
};

// Interleaves env stepping with one gradient update per step after warmup;
// stops at exactly config.train_steps env steps. Deterministic per seed.
TrainResult train_policy(const ExperimentConfig& config, const reward::Classifier& clf,
                         const state::PcaBasis* basis, std::uint64_t seed);

// Exploration disabled; runs episodes until eval_steps env steps are consumed;
// the final partial episode is excluded from the statistics.
EvalMetrics evaluate_policy(const rl::Agent& agent, const ExperimentConfig& config,
                            const reward::Classifier& clf, const state::PcaBasis* basis,
                            std::uint64_t seed);

struct CellResult {
    std::string spec;
    std::string algo;
    std::uint64_t seed = 0;
    double avg_reward = 0.0;
    double task_success_pct = 0.0;
    int episodes = 0;
    long train_steps = 0;
    std::string error;  // empty on success
};

struct SummaryRow {
    std::string spec;
    std::string algo;
    double best_success = 0.0;
    double mean_success = 0.0, sd_success = 0.0;
    double best_reward = 0.0;
    double mean_reward = 0.0, sd_reward = 0.0;
};

struct CompareResults {
    std::vector<CellResult> cells;
    std::vector<SummaryRow> summary;
};

// Full (spec x algorithm x seed) cross product on a bounded worker pool; writes
// results.csv, summary.txt, and episodes.jsonl under config.out_dir. Per-cell
// failures are recorded and the table is still emitted.
CompareResults compare_representations(const ExperimentConfig& base,
                                       const std::vector<state::StateSpec>& specs,
                                       const std::vector<rl::Algo>& algos,
                                       const std::vector<std::uint64_t>& seeds,
                                       const reward::Classifier& clf,
                                       const state::PcaBasis* basis,
                                       int max_workers = 0);

void write_csv(const std::string& path, const std::vector<CellResult>& cells);
void write_summary(const std::string& path, const CompareResults& results);
void write_episode_jsonl(const std::string& path, const std::string& spec,
                         const std::string& algo, std::uint64_t seed,
                         const std::vector<EpisodeLog>& logs, bool append);

}  // namespace rw::harness
