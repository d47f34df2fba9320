#include "rw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rw/errors.hpp"
#include "rw/io.hpp"

namespace rw::data {

int CaptureSession::count(Label l) const {
    int n = 0;
    for (const auto& li : images) n += (li.label == l) ? 1 : 0;
    return n;
}

Image quantize_roundtrip(const Image& img) {
    Image out = img;
    for (Eigen::Index i = 0; i < out.pixels.size(); ++i) {
        double p = std::clamp(out.pixels[i], 0.0, 1.0);
        out.pixels[i] = std::round(p * 255.0) / 255.0;
    }
    return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step; decorrelates per-purpose RNG streams.
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// A grasped scene at an arbitrary arm pose with the cube held at the gripper
// and its height inside [z_lo, z_hi]. Poses are drawn over the full joint
// space so the classifier learns "cube held at height X" independent of how
// the arm got there. The distractor follows the same mirrored-placement rule
// the environment uses at reset, so these frames match in-episode scenes.
// When in_window is set, only scenes with the cube fully visible laterally
// qualify; non-success holds must NOT set it, so that carries that leave the
// camera view still appear in the corpus (a lifted-out-of-view cube must not
// read as success, or an agent could farm reward by hiding the cube).
sim::WorldState random_grasped_state(std::mt19937_64& rng, const sim::EnvConfig& cfg,
                                     double z_lo, double z_hi, bool in_window) {
    std::uniform_real_distribution<double> joint(0.0, 180.0);
    std::uniform_real_distribution<double> closed(cfg.hand_close_threshold, 180.0);
    std::uniform_real_distribution<double> table_x(cfg.cube_x_lo, cfg.cube_x_hi);
    std::uniform_real_distribution<double> table_y(cfg.cube_y_lo, cfg.cube_y_hi);
    for (int tries = 0; tries < 100000; ++tries) {
        sim::WorldState s;
        s.joints.shoulder_pitch = joint(rng);
        s.joints.shoulder_roll = joint(rng);
        s.joints.elbow_roll = joint(rng);
        s.joints.hand = closed(rng);
        const Eigen::Vector3d g = sim::gripper_world(s.joints, cfg);
        if (g.z() < z_lo || g.z() > z_hi) continue;
        if (in_window && std::abs(g.y()) > 0.26) continue;
        s.grasped = true;
        s.cube_position = g;
        const double home_y = table_y(rng);  // where the cube stood before the lift
        s.distractor_position = {table_x(rng),
                                 -home_y + (home_y >= 0.0 ? -1.0 : 1.0) * 3.0 * cfg.cube_side,
                                 cfg.table_height + cfg.cube_side / 2.0};
        return s;
    }
    throw UsageError("generate_session: cannot pose a grasped scene in this env config");
}

}  // namespace

CaptureSession generate_session(const sim::EnvConfig& cfg, int session_id,
                                std::uint64_t seed, int n_success, int n_nonsuccess) {
    if (n_success < 1 || n_nonsuccess < 1)
        throw ContractError("generate_session: image counts must be >= 1");

    CaptureSession session;
    session.session_id = session_id;
    session.seed = seed;

    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(session_id)));
    std::uniform_real_distribution<double> offset(-15.0, 15.0);

    // Per-session workspace variability: shift the arm's reset sampling ranges.
    // Named draws: argument evaluation order is unspecified in C++.
    const double pitch_off = offset(rng);
    const double roll_off = offset(rng);
    const double elbow_off = offset(rng);
    sim::EnvConfig scfg = cfg;
    scfg.reset_pose = cfg.reset_pose.shifted(pitch_off, roll_off, elbow_off);

    // Success frames: the cube held at or above the goal height. Half come
    // from terminal observations of expert rollouts, half from grasped scenes
    // at arbitrary arm poses, so the classifier recognizes success however
    // the arm reached it, not just along expert-style trajectories. Keeping
    // the class at-goal-only (never partial lifts) makes the predicted reward
    // spike only where the task is actually complete, so an agent cannot farm
    // reward by holding the cube short of the goal.
    // The camera quantizes height to 1.75 cm pixels, so scenes within about
    // half a pixel of the goal height render identically on either side of
    // it. Success sampling starts half a pixel above the goal and non-success
    // holds run all the way up to it: images in the contested render cell
    // then carry only NonSuccess labels, which keeps the predicted reward
    // ~0 everywhere an agent could park, at the cost of under-scoring
    // successes that barely cross the goal.
    const double goal_z = cfg.table_height + cfg.lift_height;
    const double success_z_lo = goal_z + 0.005;
    int expert_failures = 0;
    for (int i = 0; i < n_success;) {
        if (i % 2 == 1) {
            sim::WorldState s =
                random_grasped_state(rng, scfg, success_z_lo, goal_z + 0.11, true);
            session.images.push_back({quantize_roundtrip(sim::render(s, scfg)), Label::Success});
            ++i;
            continue;
        }
        sim::WorldState s = sim::reset(scfg, rng());
        sim::StepResult r;
        while (!s.done) {
            auto [ns, res] = sim::step(s, sim::scripted_expert(s, scfg), scfg);
            s = std::move(ns);
            r = std::move(res);
        }
        if (!r.ground_truth_success) {
            if (++expert_failures > 50)
                throw UsageError("generate_session: scripted expert cannot solve this env config");
            continue;
        }
        session.images.push_back({quantize_roundtrip(r.observation), Label::Success});
        ++i;
    }

    // Near-miss non-success: truncated expert approaches with the hand forced
    // open (the reset pose starts closed, so the cube drops within a few
    // steps), plus grasped scenes holding the cube anywhere below the goal —
    // from deep under the table edge of the workspace right up to the goal
    // height, with no camera-window restriction. The below-goal holds teach
    // the classifier that a carried-but-not-there cube is still non-success
    // wherever (and whether or not) it is visible, closing the reward-farming
    // loopholes of parking just under the goal or swinging the cube out of
    // view. Half of them concentrate in the top band under the goal, where
    // that pressure matters most.
    const int n_near = n_nonsuccess / 2;
    std::uniform_int_distribution<int> steps_dist(0, 16);
    for (int i = 0; i < n_near;) {
        if (i % 2 == 1) {
            const double z_lo = (i % 4 == 1) ? 0.46 : goal_z - 0.05;
            sim::WorldState s =
                random_grasped_state(rng, scfg, z_lo, goal_z - 1e-4, false);
            session.images.push_back(
                {quantize_roundtrip(sim::render(s, scfg)), Label::NonSuccess});
            ++i;
            continue;
        }
        sim::WorldState s = sim::reset(scfg, rng());
        int t = steps_dist(rng);
        for (int k = 0; k < t && !s.done; ++k) {
            Eigen::Vector4d a = sim::scripted_expert(s, scfg);
            a[3] = -1.0;  // open the hand instead of keeping the grasp
            s = sim::step(s, a, scfg).first;
        }
        // A fast expert start can complete the lift before the hand opens;
        // such frames are successes and cannot carry this label. Resample.
        if (sim::ground_truth_success(s, scfg)) continue;
        session.images.push_back({quantize_roundtrip(sim::render(s, scfg)), Label::NonSuccess});
        ++i;
    }

    // Far non-success: arbitrary arm poses anywhere in joint space with the
    // cube resting anywhere in its table region, sampled independently of
    // each other. Unlike reset(), this imposes no gripper-cube proximity, so
    // it covers scenes like an empty raised gripper with the cube still on
    // the table — which must not read as success, or an agent could farm
    // reward by posing the bare arm.
    std::uniform_real_distribution<double> far_joint(0.0, 180.0);
    std::uniform_real_distribution<double> far_x(cfg.cube_x_lo, cfg.cube_x_hi);
    std::uniform_real_distribution<double> far_y(cfg.cube_y_lo, cfg.cube_y_hi);
    for (int i = n_near; i < n_nonsuccess; ++i) {
        sim::WorldState s;
        s.joints.shoulder_pitch = far_joint(rng);
        s.joints.shoulder_roll = far_joint(rng);
        s.joints.elbow_roll = far_joint(rng);
        s.joints.hand = far_joint(rng);
        s.cube_position = {far_x(rng), far_y(rng), cfg.table_height + cfg.cube_side / 2.0};
        const double cy = s.cube_position.y();
        s.distractor_position = {far_x(rng),
                                 -cy + (cy >= 0.0 ? -1.0 : 1.0) * 3.0 * cfg.cube_side,
                                 cfg.table_height + cfg.cube_side / 2.0};
        session.images.push_back({quantize_roundtrip(sim::render(s, scfg)), Label::NonSuccess});
    }
    return session;
}

DatasetSplit split_sessions(std::vector<CaptureSession> sessions) {
    if (sessions.size() < 3)
        throw ContractError("split_sessions: need at least 3 sessions for an 8:1:1 split");
    std::sort(sessions.begin(), sessions.end(),
              [](const CaptureSession& a, const CaptureSession& b) {
                  return a.session_id < b.session_id;
              });
    for (std::size_t i = 1; i < sessions.size(); ++i)
        if (sessions[i].session_id == sessions[i - 1].session_id)
            throw ContractError("split_sessions: duplicate session_id " +
                                std::to_string(sessions[i].session_id));

    const std::size_t n = sessions.size();
    const std::size_t n_val = std::max<std::size_t>(1, n / 10);
    const std::size_t n_test = std::max<std::size_t>(1, n / 10);
    const std::size_t n_train = n - n_val - n_test;

    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            split.train.push_back(std::move(sessions[i]));
        else if (i < n_train + n_val)
            split.validation.push_back(std::move(sessions[i]));
        else
            split.test.push_back(std::move(sessions[i]));
    }
    return split;
}

namespace {
constexpr char kMagic[4] = {'R', 'W', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::size_t dataset_file_size(int width, int height,
                              const std::vector<CaptureSession>& sessions) {
    std::size_t sz = 4 + 2 + 2 + 2 + 2;  // magic, version, width, height, session count
    for (const auto& s : sessions)
        sz += 2 + 4 + 8 + s.images.size() * (1 + static_cast<std::size_t>(width) * height);
    return sz;
}

void save_dataset(const std::string& path, const std::vector<CaptureSession>& sessions) {
    if (sessions.empty() || sessions[0].images.empty())
        throw ContractError("save_dataset: nothing to save");
    const int w = sessions[0].images[0].image.width;
    const int h = sessions[0].images[0].image.height;
    for (const auto& s : sessions)
        for (const auto& li : s.images)
            if (li.image.width != w || li.image.height != h)
                throw ContractError("save_dataset: inconsistent image dimensions");

    auto os = io::open_out(path);
    io::write_magic(os, kMagic);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(w));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(h));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(sessions.size()));
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
    for (const auto& s : sessions) {
        io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.session_id));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.images.size()));
        io::write_le<std::uint64_t>(os, s.seed);
        for (const auto& li : s.images) {
            io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(li.label));
            for (std::size_t i = 0; i < buf.size(); ++i)
                buf[i] = static_cast<std::uint8_t>(
                    std::round(std::clamp(li.image.pixels[static_cast<Eigen::Index>(i)], 0.0, 1.0) * 255.0));
            io::write_bytes(os, buf.data(), buf.size());
        }
    }
}

std::vector<CaptureSession> load_dataset(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, kMagic, "dataset");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        throw FormatError("unsupported dataset version " + std::to_string(version));
    const int w = io::read_le<std::uint16_t>(is);
    const int h = io::read_le<std::uint16_t>(is);
    if (w < 1 || h < 1) throw FormatError("dataset: invalid image dimensions");
    const int n_sessions = io::read_le<std::uint16_t>(is);

    std::vector<CaptureSession> sessions;
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
    for (int si = 0; si < n_sessions; ++si) {
        CaptureSession s;
        s.session_id = io::read_le<std::uint16_t>(is);
        const auto n_images = io::read_le<std::uint32_t>(is);
        s.seed = io::read_le<std::uint64_t>(is);
        s.images.reserve(n_images);
        for (std::uint32_t i = 0; i < n_images; ++i) {
            LabeledImage li;
            const auto label = io::read_le<std::uint8_t>(is);
            if (label > 1) throw FormatError("dataset: invalid label byte");
            li.label = static_cast<Label>(label);
            io::read_bytes(is, buf.data(), buf.size());
            li.image = Image(w, h);
            for (std::size_t p = 0; p < buf.size(); ++p)
                li.image.pixels[static_cast<Eigen::Index>(p)] = buf[p] / 255.0;
            s.images.push_back(std::move(li));
        }
        sessions.push_back(std::move(s));
    }
    if (is.peek() != EOF) throw FormatError("dataset: trailing bytes after last session");
    return sessions;
}

}  // namespace rw::data
