#include "rw/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "rw/errors.hpp"

namespace rw::config {

namespace {

double parse_double(const std::string& v) {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw UsageError("config: bad number '" + v + "'");
    return d;
}

long parse_long(const std::string& v) {
    std::size_t pos = 0;
    long n = std::stol(v, &pos);
    if (pos != v.size()) throw UsageError("config: bad integer '" + v + "'");
    return n;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_experiment_key(harness::ExperimentConfig& cfg, const std::string& key,
                          const std::string& value) {
    using C = harness::ExperimentConfig;
    static const std::map<std::string, std::function<void(C&, const std::string&)>> setters = {
        {"spec", [](C& c, const std::string& v) { c.spec = state::parse_state_spec(v); }},
        {"algo", [](C& c, const std::string& v) { c.algo = rl::parse_algo(v); }},
        {"train_steps", [](C& c, const std::string& v) { c.train_steps = parse_long(v); }},
        {"eval_steps", [](C& c, const std::string& v) { c.eval_steps = parse_long(v); }},
        {"n_seeds", [](C& c, const std::string& v) { c.n_seeds = static_cast<int>(parse_long(v)); }},
        {"out_dir", [](C& c, const std::string& v) { c.out_dir = v; }},
        {"hp.gamma", [](C& c, const std::string& v) { c.hp.gamma = parse_double(v); }},
        {"hp.tau", [](C& c, const std::string& v) { c.hp.tau = parse_double(v); }},
        {"hp.actor_lr", [](C& c, const std::string& v) { c.hp.actor_lr = parse_double(v); }},
        {"hp.critic_lr", [](C& c, const std::string& v) { c.hp.critic_lr = parse_double(v); }},
        {"hp.batch", [](C& c, const std::string& v) { c.hp.batch = static_cast<int>(parse_long(v)); }},
        {"hp.buffer_capacity",
         [](C& c, const std::string& v) { c.hp.buffer_capacity = static_cast<std::size_t>(parse_long(v)); }},
        {"hp.warmup_steps", [](C& c, const std::string& v) { c.hp.warmup_steps = parse_long(v); }},
        {"hp.sigma_expl", [](C& c, const std::string& v) { c.hp.sigma_expl = parse_double(v); }},
        {"hp.policy_delay",
         [](C& c, const std::string& v) { c.hp.policy_delay = static_cast<int>(parse_long(v)); }},
        {"hp.sigma_target", [](C& c, const std::string& v) { c.hp.sigma_target = parse_double(v); }},
        {"hp.noise_clip", [](C& c, const std::string& v) { c.hp.noise_clip = parse_double(v); }},
        {"hp.seed", [](C& c, const std::string& v) { c.hp.seed = static_cast<std::uint64_t>(parse_long(v)); }},
    };
    if (key.rfind("env.", 0) == 0) {
        sim::apply_env_key(cfg.env, key.substr(4), value);
        return;
    }
    auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("experiment config: unknown key '" + key + "'");
    it->second(cfg, value);
}

harness::ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open experiment config: " + path);
    harness::ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        apply_experiment_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.env.validate();
    cfg.hp.validate();
    return cfg;
}

}  // namespace rw::config
