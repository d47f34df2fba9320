#include "rw/rl.hpp"

#include <algorithm>
#include <cmath>

#include "rw/errors.hpp"
#include "rw/io.hpp"

namespace rw::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
    if (capacity_ == 0) throw ContractError("replay buffer: capacity must be positive");
    ring_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(Transition t) {
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(t));
    } else {
        ring_[cursor_] = std::move(t);  // overwrite oldest, strict FIFO order
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch) {
    if (ring_.size() < batch)
        throw ContractError("replay buffer: cannot sample " + std::to_string(batch) +
                            " from " + std::to_string(ring_.size()) + " transitions");
    std::uniform_int_distribution<std::size_t> pick(0, ring_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&ring_[pick(rng_)]);
    return out;
}

void HyperParams::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("hp: gamma must be in (0,1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("hp: tau must be in (0,1]");
    if (policy_delay < 1) throw UsageError("hp: policy_delay must be >= 1");
    if (sigma_expl < 0.0 || sigma_target < 0.0) throw UsageError("hp: noise sigmas must be >= 0");
    if (batch < 1) throw UsageError("hp: batch must be >= 1");
}

Algo parse_algo(const std::string& name) {
    if (name == "ddpg" || name == "DDPG") return Algo::DDPG;
    if (name == "td3" || name == "TD3") return Algo::TD3;
    throw UsageError("unknown algorithm '" + name + "' (expected ddpg or td3)");
}

std::string algo_name(Algo a) { return a == Algo::DDPG ? "ddpg" : "td3"; }

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

nn::Network make_mlp(int in, const std::vector<int>& hidden, int out, bool tanh_head,
                     std::uint64_t seed) {
    std::vector<nn::LayerSpec> layers;
    int cur = in;
    for (int h : hidden) {
        layers.push_back(nn::LayerSpec::dense(cur, h));
        layers.push_back(nn::LayerSpec::relu());
        cur = h;
    }
    layers.push_back(nn::LayerSpec::dense(cur, out));
    if (tanh_head) layers.push_back(nn::LayerSpec::tanh());
    return nn::build_network(nn::Shape{{in}}, std::move(layers), seed);
}

nn::Mat concat_sa(const nn::Mat& s, const nn::Mat& a) {
    nn::Mat x(s.rows(), s.cols() + a.cols());
    x << s, a;
    return x;
}

}  // namespace

Agent make_agent(Algo algo, int state_dim, const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    if (state_dim < 1) throw ContractError("make_agent: state_dim must be >= 1");
    Agent ag;
    ag.algo = algo;
    ag.state_dim = state_dim;
    ag.actor = make_mlp(state_dim, hp.actor_hidden, kActionDim, true, mix_seed(seed, 1));
    ag.critic1 = make_mlp(state_dim + kActionDim, hp.critic_hidden, 1, false, mix_seed(seed, 2));
    ag.target_actor = ag.actor;
    ag.target_critic1 = ag.critic1;
    ag.actor_adam = nn::make_adam(ag.actor, hp.actor_lr);
    ag.critic1_adam = nn::make_adam(ag.critic1, hp.critic_lr);
    if (algo == Algo::TD3) {
        ag.critic2 = make_mlp(state_dim + kActionDim, hp.critic_hidden, 1, false, mix_seed(seed, 3));
        ag.target_critic2 = ag.critic2;
        ag.critic2_adam = nn::make_adam(ag.critic2, hp.critic_lr);
    }
    return ag;
}

Vector4d select_action(const Agent& agent, const VectorXd& state, bool explore,
                       std::mt19937_64& rng, const HyperParams& hp, bool warmup) {
    if (state.size() != agent.state_dim)
        throw ContractError("select_action: state dim " + std::to_string(state.size()) +
                            " != agent dim " + std::to_string(agent.state_dim));
    if (warmup) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector4d a;
        for (int i = 0; i < kActionDim; ++i) a[i] = u(rng);
        return a;
    }
    nn::Mat out = nn::forward(agent.actor, state.transpose());
    Vector4d a = out.row(0).transpose();
    if (explore && hp.sigma_expl > 0.0) {
        std::normal_distribution<double> noise(0.0, hp.sigma_expl);
        for (int i = 0; i < kActionDim; ++i) a[i] += noise(rng);
    }
    return a.cwiseMax(-1.0).cwiseMin(1.0);
}

namespace {

struct BatchViews {
    nn::Mat states, actions, next_states;
    Eigen::VectorXd rewards, not_done;
};

BatchViews gather(const std::vector<const Transition*>& batch, int state_dim) {
    if (batch.empty()) throw ContractError("update: empty batch");
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    BatchViews v;
    v.states.resize(B, state_dim);
    v.actions.resize(B, kActionDim);
    v.next_states.resize(B, state_dim);
    v.rewards.resize(B);
    v.not_done.resize(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const Transition& t = *batch[i];
        if (t.state.size() != state_dim || t.next_state.size() != state_dim)
            throw ContractError("update: transition state dim mismatch");
        v.states.row(i) = t.state.transpose();
        v.actions.row(i) = t.action.transpose();
        v.next_states.row(i) = t.next_state.transpose();
        v.rewards[i] = t.reward;
        v.not_done[i] = t.done ? 0.0 : 1.0;
    }
    return v;
}

// One mean-squared-error regression step of a critic toward targets y.
double critic_regress(nn::Network& critic, nn::AdamState& adam, const nn::Mat& sa,
                      const Eigen::VectorXd& y) {
    const Eigen::Index B = sa.rows();
    nn::Tape tape;
    nn::Mat q = nn::forward(critic, sa, &tape);
    Eigen::VectorXd diff = q.col(0) - y;
    const double loss = diff.squaredNorm() / static_cast<double>(B);
    if (!std::isfinite(loss)) throw NumericError("critic update: non-finite loss");
    nn::Mat dq = (2.0 / static_cast<double>(B)) * diff;
    nn::Gradients g = nn::backward(critic, tape, dq);
    nn::adam_step(critic, g, adam);
    return loss;
}

// Gradient-ascent step of the actor on Q(s, mu(s)); returns -mean Q.
double actor_ascend(Agent& agent, const nn::Mat& states) {
    const Eigen::Index B = states.rows();
    nn::Tape actor_tape;
    nn::Mat a_pi = nn::forward(agent.actor, states, &actor_tape);
    nn::Tape critic_tape;
    nn::Mat q = nn::forward(agent.critic1, concat_sa(states, a_pi), &critic_tape);
    const double loss = -q.col(0).mean();
    if (!std::isfinite(loss)) throw NumericError("actor update: non-finite loss");
    nn::Mat dq = nn::Mat::Constant(B, 1, -1.0 / static_cast<double>(B));
    nn::Mat dsa;
    nn::backward(agent.critic1, critic_tape, dq, &dsa);
    nn::Mat da = dsa.rightCols(kActionDim);
    nn::Gradients g = nn::backward(agent.actor, actor_tape, da);
    nn::adam_step(agent.actor, g, agent.actor_adam);
    return loss;
}

}  // namespace

UpdateResult ddpg_update(Agent& agent, const std::vector<const Transition*>& batch,
                         const HyperParams& hp) {
    BatchViews v = gather(batch, agent.state_dim);
    nn::Mat a_next = nn::forward(agent.target_actor, v.next_states);
    nn::Mat q_next = nn::forward(agent.target_critic1, concat_sa(v.next_states, a_next));
    Eigen::VectorXd y =
        v.rewards.array() + hp.gamma * v.not_done.array() * q_next.col(0).array();

    UpdateResult r;
    r.critic_loss = critic_regress(agent.critic1, agent.critic1_adam,
                                   concat_sa(v.states, v.actions), y);
    r.actor_loss = actor_ascend(agent, v.states);
    polyak_update(agent.target_critic1, agent.critic1, hp.tau);
    polyak_update(agent.target_actor, agent.actor, hp.tau);
    agent.update_count += 1;
    return r;
}

UpdateResult td3_update(Agent& agent, const std::vector<const Transition*>& batch,
                        const HyperParams& hp, long update_index, std::mt19937_64& noise_rng) {
    if (agent.critic2.layers.empty())
        throw ContractError("td3_update: agent has a single critic (built for DDPG?)");
    BatchViews v = gather(batch, agent.state_dim);

    // Target-policy smoothing: clipped Gaussian noise on the target action.
    nn::Mat a_next = nn::forward(agent.target_actor, v.next_states);
    if (hp.sigma_target > 0.0) {
        std::normal_distribution<double> noise(0.0, hp.sigma_target);
        for (Eigen::Index i = 0; i < a_next.size(); ++i)
            a_next.data()[i] += std::clamp(noise(noise_rng), -hp.noise_clip, hp.noise_clip);
        a_next = a_next.cwiseMax(-1.0).cwiseMin(1.0);
    }
    nn::Mat sa_next = concat_sa(v.next_states, a_next);
    nn::Mat q1 = nn::forward(agent.target_critic1, sa_next);
    nn::Mat q2 = nn::forward(agent.target_critic2, sa_next);
    Eigen::VectorXd q_min = q1.col(0).cwiseMin(q2.col(0));
    Eigen::VectorXd y = v.rewards.array() + hp.gamma * v.not_done.array() * q_min.array();

    nn::Mat sa = concat_sa(v.states, v.actions);
    UpdateResult r;
    const double l1 = critic_regress(agent.critic1, agent.critic1_adam, sa, y);
    const double l2 = critic_regress(agent.critic2, agent.critic2_adam, sa, y);
    r.critic_loss = 0.5 * (l1 + l2);

    if (update_index % hp.policy_delay == 0) {
        r.actor_loss = actor_ascend(agent, v.states);
        polyak_update(agent.target_critic1, agent.critic1, hp.tau);
        polyak_update(agent.target_critic2, agent.critic2, hp.tau);
        polyak_update(agent.target_actor, agent.actor, hp.tau);
    }
    agent.update_count += 1;
    return r;
}

void polyak_update(nn::Network& target, const nn::Network& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("polyak: tau must be in (0,1]");
    if (target.layers.size() != online.layers.size())
        throw ContractError("polyak: network layer count mismatch");
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        if (target.weights[l].rows() != online.weights[l].rows() ||
            target.weights[l].cols() != online.weights[l].cols())
            throw ContractError("polyak: weight shape mismatch at layer " + std::to_string(l));
        target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
        target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
}

namespace {
constexpr char kMagic[4] = {'R', 'W', 'P', 'L'};
constexpr std::uint16_t kVersion = 1;

void write_spec(std::ostream& os, const state::StateSpec& spec) {
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(spec.variant));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.width));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.height));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.k));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.n));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.reward_w));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spec.reward_h));
}

state::StateSpec read_spec(std::istream& is) {
    state::StateSpec spec;
    const auto variant = io::read_le<std::uint8_t>(is);
    if (variant > 2) throw FormatError("policy: unknown state spec variant");
    spec.variant = static_cast<state::Variant>(variant);
    spec.width = io::read_le<std::uint16_t>(is);
    spec.height = io::read_le<std::uint16_t>(is);
    spec.k = io::read_le<std::uint16_t>(is);
    spec.n = io::read_le<std::uint16_t>(is);
    spec.reward_w = io::read_le<std::uint16_t>(is);
    spec.reward_h = io::read_le<std::uint16_t>(is);
    return spec;
}
}  // namespace

void save_policy(const std::string& path, const Agent& agent, const state::StateSpec& spec) {
    auto os = io::open_out(path);
    io::write_magic(os, kMagic);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(agent.algo));
    write_spec(os, spec);
    io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(agent.update_count));
    nn::save_network(os, agent.actor);
    nn::save_network(os, agent.critic1);
    if (agent.algo == Algo::TD3) nn::save_network(os, agent.critic2);
    nn::save_network(os, agent.target_actor);
    nn::save_network(os, agent.target_critic1);
    if (agent.algo == Algo::TD3) nn::save_network(os, agent.target_critic2);
}

std::pair<Agent, state::StateSpec> load_policy(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, kMagic, "policy");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        throw FormatError("unsupported policy version " + std::to_string(version));
    const auto algo_tag = io::read_le<std::uint8_t>(is);
    if (algo_tag > 1) throw FormatError("policy: unknown algorithm tag");

    Agent ag;
    ag.algo = static_cast<Algo>(algo_tag);
    state::StateSpec spec = read_spec(is);
    ag.update_count = static_cast<long>(io::read_le<std::uint64_t>(is));
    ag.actor = nn::load_network(is);
    ag.critic1 = nn::load_network(is);
    if (ag.algo == Algo::TD3) ag.critic2 = nn::load_network(is);
    ag.target_actor = nn::load_network(is);
    ag.target_critic1 = nn::load_network(is);
    if (ag.algo == Algo::TD3) ag.target_critic2 = nn::load_network(is);
    ag.state_dim = ag.actor.input_shape.flat();
    ag.actor_adam = nn::make_adam(ag.actor, 1e-3);
    ag.critic1_adam = nn::make_adam(ag.critic1, 1e-3);
    if (ag.algo == Algo::TD3) ag.critic2_adam = nn::make_adam(ag.critic2, 1e-3);
    return {std::move(ag), spec};
}

}  // namespace rw::rl
