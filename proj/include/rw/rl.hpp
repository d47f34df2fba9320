#pragma once

// Off-policy actor-critic learners: DDPG and TD3.

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rw/nn.hpp"
#include "rw/state_repr.hpp"

namespace rw::rl {

using Eigen::Vector4d;
using Eigen::VectorXd;

constexpr int kActionDim = 4;

struct Transition {
    VectorXd state;
    Vector4d action;
    double reward = 0.0;
    VectorXd next_state;
    bool done = false;
};

class ReplayBuffer {
  public:
    ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void push(Transition t);
    // Uniform with replacement; throws when size < batch.
    std::vector<const Transition*> sample(std::size_t batch);
    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return ring_[i]; }

  private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> ring_;
    std::mt19937_64 rng_;
};

struct HyperParams {
    double gamma = 0.99;
    double tau = 0.005;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    int batch = 64;
    std::size_t buffer_capacity = 100000;
    long warmup_steps = 1000;
    double sigma_expl = 0.1;
    // TD3 only:
    int policy_delay = 2;
    double sigma_target = 0.2;
    double noise_clip = 0.5;
    std::uint64_t seed = 0;
    std::vector<int> actor_hidden = {64, 64};
    std::vector<int> critic_hidden = {64, 64};

    void validate() const;
};

enum class Algo : std::uint8_t { DDPG = 0, TD3 = 1 };

Algo parse_algo(const std::string& name);
std::string algo_name(Algo a);

// Online actor/critic networks plus Polyak-tracked target copies. Target
// networks deliberately have no Adam state: they only ever receive mixes.
struct Agent {
    Algo algo = Algo::DDPG;
    int state_dim = 0;
    nn::Network actor, critic1, critic2;
    nn::Network target_actor, target_critic1, target_critic2;
    nn::AdamState actor_adam, critic1_adam, critic2_adam;
    long update_count = 0;
};

Agent make_agent(Algo algo, int state_dim, const HyperParams& hp, std::uint64_t seed);

// Deterministic tanh-bounded actor output; optional Gaussian exploration noise
// clamped back into [-1,1]. `warmup` forces uniform random actions.
Vector4d select_action(const Agent& agent, const VectorXd& state, bool explore,
                       std::mt19937_64& rng, const HyperParams& hp, bool warmup = false);

struct UpdateResult {
    double critic_loss = 0.0;
    std::optional<double> actor_loss;
};

UpdateResult ddpg_update(Agent& agent, const std::vector<const Transition*>& batch,
                         const HyperParams& hp);
// `update_index` gates the delayed actor/target updates (mod policy_delay == 0).
UpdateResult td3_update(Agent& agent, const std::vector<const Transition*>& batch,
                        const HyperParams& hp, long update_index,
                        std::mt19937_64& noise_rng);

// theta' <- tau*theta + (1-tau)*theta', elementwise.
void polyak_update(nn::Network& target, const nn::Network& online, double tau);

// "RWPL" policy file: algorithm tag + StateSpec descriptor + network payloads
// (actor, critic1[, critic2], then the target copies, in that order).
void save_policy(const std::string& path, const Agent& agent, const state::StateSpec& spec);
std::pair<Agent, state::StateSpec> load_policy(const std::string& path);

}  // namespace rw::rl
