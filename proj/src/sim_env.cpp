#include "rw/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rw/errors.hpp"

namespace rw::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg2Rad = kPi / 180.0;

// Camera window (orthographic along world x): lateral span and vertical span
// around the table surface. 0.56 x 0.42 keeps the 4:3 aspect of QVGA chains.
constexpr double kViewHalfY = 0.28;
constexpr double kViewBelowTable = 0.20;
constexpr double kViewAboveTable = 0.22;

constexpr double kTableBandDepth = 0.04;   // visible table edge thickness (m)
constexpr double kArmThickness = 0.015;    // half-thickness of link strokes (m)
constexpr double kGripperOpenRadius = 0.035;
constexpr double kGripperClosedRadius = 0.012;

constexpr double kBackground = 0.05;
constexpr double kTableIntensity = 0.35;
constexpr double kCubeIntensity = 0.9;
constexpr double kArmIntensity = 0.6;
constexpr double kGripperIntensity = 0.75;

double clamp_angle(double deg) { return std::clamp(deg, 0.0, 180.0); }

Vector3d shoulder_position(const EnvConfig& cfg) {
    return {0.0, 0.0, cfg.shoulder_height};
}

}  // namespace

PoseRanges PoseRanges::shifted(double pitch_off, double roll_off, double elbow_off) const {
    PoseRanges r = *this;
    r.pitch_lo = clamp_angle(pitch_lo + pitch_off);
    r.pitch_hi = clamp_angle(pitch_hi + pitch_off);
    r.roll_lo = clamp_angle(roll_lo + roll_off);
    r.roll_hi = clamp_angle(roll_hi + roll_off);
    r.elbow_lo = clamp_angle(elbow_lo + elbow_off);
    r.elbow_hi = clamp_angle(elbow_hi + elbow_off);
    return r;
}

void EnvConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw UsageError(std::string("env config: ") + name + " must be > 0");
    };
    positive(upper_arm_len, "upper_arm_len");
    positive(forearm_len, "forearm_len");
    positive(table_height, "table_height");
    positive(cube_side, "cube_side");
    positive(grasp_radius, "grasp_radius");
    positive(lift_height, "lift_height");
    positive(omega_max, "omega_max");
    if (max_steps < 1) throw UsageError("env config: max_steps must be >= 1");
    if (cam_width < 8 || cam_height < 8)
        throw UsageError("env config: camera resolution components must be >= 8");
}

Vector3d forward_kinematics(const JointAngles& j, const EnvConfig& cfg) {
    const double phi = (j.shoulder_pitch - 90.0) * kDeg2Rad;  // elevation
    const double psi = (j.shoulder_roll - 90.0) * kDeg2Rad;   // azimuth
    const double te = j.elbow_roll * kDeg2Rad;

    const Vector3d d1(std::cos(phi) * std::cos(psi), std::cos(phi) * std::sin(psi),
                      std::sin(phi));
    // Local "up": perpendicular to d1 in the vertical plane through the arm.
    const Vector3d e2(-std::sin(phi) * std::cos(psi), -std::sin(phi) * std::sin(psi),
                      std::cos(phi));
    const Vector3d d2 = std::cos(te) * d1 + std::sin(te) * e2;
    return cfg.upper_arm_len * d1 + cfg.forearm_len * d2;
}

Vector3d gripper_world(const JointAngles& j, const EnvConfig& cfg) {
    return shoulder_position(cfg) + forward_kinematics(j, cfg);
}

double gripper_cube_distance(const WorldState& s, const EnvConfig& cfg) {
    return (gripper_world(s.joints, cfg) - s.cube_position).norm();
}

bool ground_truth_success(const WorldState& s, const EnvConfig& cfg) {
    return s.grasped && s.cube_position.z() >= cfg.table_height + cfg.lift_height;
}

namespace {

// Kinematic core of step(): joint motion, grasp/drop transitions, cube carry.
// Shared by step() and by reset()'s solvability simulation, which must not pay
// for rendering.
WorldState advance(const WorldState& s, const Vector4d& action, const EnvConfig& cfg) {
    Vector4d a = action.cwiseMax(-1.0).cwiseMin(1.0);
    WorldState n = s;
    n.joints.shoulder_pitch = clamp_angle(s.joints.shoulder_pitch + a[0] * cfg.omega_max);
    n.joints.shoulder_roll = clamp_angle(s.joints.shoulder_roll + a[1] * cfg.omega_max);
    n.joints.elbow_roll = clamp_angle(s.joints.elbow_roll + a[2] * cfg.omega_max);
    n.joints.hand = clamp_angle(s.joints.hand + a[3] * cfg.omega_max);

    const Vector3d gripper = gripper_world(n.joints, cfg);
    if (n.grasped && n.joints.hand < cfg.hand_close_threshold) {
        // Hand opened: the cube drops straight down onto the table.
        n.grasped = false;
        n.cube_position.z() = cfg.table_height + cfg.cube_side / 2.0;
    }
    if (!n.grasped && n.joints.hand >= cfg.hand_close_threshold &&
        (gripper - n.cube_position).norm() <= cfg.grasp_radius) {
        n.grasped = true;
    }
    if (n.grasped) n.cube_position = gripper;

    n.step_index = s.step_index + 1;
    return n;
}

// True when the given constant action, replayed open-loop from s, completes
// the task within the step cap.
bool constant_action_solves(const WorldState& s, const Vector4d& action,
                            const EnvConfig& cfg) {
    WorldState t = s;
    while (t.step_index < cfg.max_steps) {
        t = advance(t, action, cfg);
        if (ground_truth_success(t, cfg)) return true;
    }
    return false;
}

}  // namespace

WorldState reset(const EnvConfig& cfg, std::uint64_t episode_seed) {
    cfg.validate();
    std::mt19937_64 rng(episode_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const Vector3d shoulder = shoulder_position(cfg);
    const double reach_lo = std::abs(cfg.upper_arm_len - cfg.forearm_len) + 0.02;
    const double reach_hi = cfg.upper_arm_len + cfg.forearm_len - 0.01;
    const double cube_z = cfg.table_height + cfg.cube_side / 2.0;
    const PoseRanges& pr = cfg.reset_pose;

    for (int attempt = 0; attempt < 100; ++attempt) {
        WorldState s;
        s.joints.shoulder_pitch = uniform(pr.pitch_lo, pr.pitch_hi);
        s.joints.shoulder_roll = uniform(pr.roll_lo, pr.roll_hi);
        s.joints.elbow_roll = uniform(pr.elbow_lo, pr.elbow_hi);
        s.joints.hand = uniform(pr.hand_lo, pr.hand_hi);
        // Cube placement: strict attempts seed the cube laterally at the
        // sampled gripper position (then clamp into the table region) so the
        // episode starts "arm at the cube"; fallback attempts sample the
        // region uniformly.
        const bool strict = attempt < 75;
        if (strict) {
            const Vector3d g = gripper_world(s.joints, cfg);
            s.cube_position = {
                std::clamp(g.x() + uniform(-0.02, 0.02), cfg.cube_x_lo, cfg.cube_x_hi),
                std::clamp(g.y() + uniform(-0.02, 0.02), cfg.cube_y_lo, cfg.cube_y_hi),
                cube_z};
        } else {
            s.cube_position = {uniform(cfg.cube_x_lo, cfg.cube_x_hi),
                               uniform(cfg.cube_y_lo, cfg.cube_y_hi), cube_z};
        }
        // Distractor: mirrored laterally, offset so the two cubes never merge.
        s.distractor_position = {uniform(cfg.cube_x_lo, cfg.cube_x_hi),
                                 -s.cube_position.y() +
                                     (s.cube_position.y() >= 0.0 ? -1.0 : 1.0) * 3.0 * cfg.cube_side,
                                 cube_z};

        const double cube_dist = (s.cube_position - shoulder).norm();
        if (cube_dist < reach_lo || cube_dist > reach_hi) continue;
        // Start with the hand closed around the cube ("arm at the cube"):
        // the grasp engages on the first step and persists only while the
        // hand stays past the threshold, and success still requires the full
        // lift. Shifted sampling ranges can make the contact band rare, so
        // the last tranche of tries falls back to a loose distance band only.
        const double d = gripper_cube_distance(s, cfg);
        if (strict) {
            if (d < 0.2 * cfg.grasp_radius || d > 0.7 * cfg.grasp_radius) continue;
            // Strict starts must also be solvable open-loop: the canonical
            // constant lifting action (swing the shoulder up, fold the elbow,
            // close the hand) must complete the task from here. This keeps
            // the episode winnable by simple constant behavior, which is what
            // a memoryless policy can express before any reward has been
            // observed.
            if (!constant_action_solves(s, {-1.0, -1.0, 1.0, 1.0}, cfg)) continue;
        } else if (d > 5.0 * cfg.grasp_radius) {
            continue;
        }
        return s;
    }
    throw UsageError("reset: could not place a reachable cube within 100 tries; "
                     "check arm lengths, table height, and cube region");
}

std::pair<WorldState, StepResult> step(const WorldState& s, const Vector4d& action,
                                       const EnvConfig& cfg) {
    if (s.done) throw ContractError("step: episode is already done");

    WorldState n = advance(s, action, cfg);
    const bool success = ground_truth_success(n, cfg);
    StepResult r;
    r.ground_truth_success = success;
    r.done = success || n.step_index >= cfg.max_steps;
    r.done_reason = success ? DoneReason::Success
                            : (r.done ? DoneReason::Timeout : DoneReason::Running);
    n.done = r.done;
    r.observation = render(n, cfg);
    return {std::move(n), std::move(r)};
}

namespace {

struct Camera {
    int w, h;
    double y_min, y_max, z_min, z_max;

    explicit Camera(const EnvConfig& cfg)
        : w(cfg.cam_width),
          h(cfg.cam_height),
          y_min(-kViewHalfY),
          y_max(kViewHalfY),
          z_min(cfg.table_height - kViewBelowTable),
          z_max(cfg.table_height + kViewAboveTable) {}

    // World coordinates of a pixel center.
    double py(int px) const { return y_min + (px + 0.5) / w * (y_max - y_min); }
    double pz(int row) const { return z_max - (row + 0.5) / h * (z_max - z_min); }
    int col_of(double y) const {
        return static_cast<int>(std::floor((y - y_min) / (y_max - y_min) * w));
    }
    int row_of(double z) const {
        return static_cast<int>(std::floor((z_max - z) / (z_max - z_min) * h));
    }
};

void fill_rect(Image& img, const Camera& cam, double yc, double zc, double half_y,
               double half_z, double intensity) {
    int c0 = std::max(0, cam.col_of(yc - half_y));
    int c1 = std::min(cam.w - 1, cam.col_of(yc + half_y));
    int r0 = std::max(0, cam.row_of(zc + half_z));
    int r1 = std::min(cam.h - 1, cam.row_of(zc - half_z));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (std::abs(cam.py(c) - yc) <= half_y && std::abs(cam.pz(r) - zc) <= half_z)
                img.at(c, r) = intensity;
}

void fill_disc(Image& img, const Camera& cam, double yc, double zc, double radius,
               double intensity) {
    int c0 = std::max(0, cam.col_of(yc - radius));
    int c1 = std::min(cam.w - 1, cam.col_of(yc + radius));
    int r0 = std::max(0, cam.row_of(zc + radius));
    int r1 = std::min(cam.h - 1, cam.row_of(zc - radius));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            double dy = cam.py(c) - yc, dz = cam.pz(r) - zc;
            if (dy * dy + dz * dz <= radius * radius) img.at(c, r) = intensity;
        }
}

void stroke_segment(Image& img, const Camera& cam, double y0, double z0, double y1,
                    double z1, double half_width, double intensity) {
    double lo_y = std::min(y0, y1) - half_width, hi_y = std::max(y0, y1) + half_width;
    double lo_z = std::min(z0, z1) - half_width, hi_z = std::max(z0, z1) + half_width;
    int c0 = std::max(0, cam.col_of(lo_y));
    int c1 = std::min(cam.w - 1, cam.col_of(hi_y));
    int r0 = std::max(0, cam.row_of(hi_z));
    int r1 = std::min(cam.h - 1, cam.row_of(lo_z));
    const double vy = y1 - y0, vz = z1 - z0;
    const double len2 = vy * vy + vz * vz;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            double py = cam.py(c), pz = cam.pz(r);
            double t = len2 > 0.0 ? std::clamp(((py - y0) * vy + (pz - z0) * vz) / len2, 0.0, 1.0)
                                  : 0.0;
            double dy = py - (y0 + t * vy), dz = pz - (z0 + t * vz);
            if (dy * dy + dz * dz <= half_width * half_width) img.at(c, r) = intensity;
        }
}

}  // namespace

Image render(const WorldState& s, const EnvConfig& cfg) {
    Camera cam(cfg);
    Image img(cfg.cam_width, cfg.cam_height);
    img.pixels.setConstant(kBackground);

    // Table edge band just below the surface.
    fill_rect(img, cam, 0.0, cfg.table_height - kTableBandDepth / 2.0, kViewHalfY + 1.0,
              kTableBandDepth / 2.0, kTableIntensity);

    const double half = cfg.cube_side / 2.0;
    fill_rect(img, cam, s.distractor_position.y(), s.distractor_position.z(), half, half,
              kCubeIntensity);

    const Vector3d shoulder = shoulder_position(cfg);
    const double phi = (s.joints.shoulder_pitch - 90.0) * kDeg2Rad;
    const double psi = (s.joints.shoulder_roll - 90.0) * kDeg2Rad;
    const Vector3d d1(std::cos(phi) * std::cos(psi), std::cos(phi) * std::sin(psi),
                      std::sin(phi));
    const Vector3d elbow = shoulder + cfg.upper_arm_len * d1;
    const Vector3d gripper = gripper_world(s.joints, cfg);
    stroke_segment(img, cam, shoulder.y(), shoulder.z(), elbow.y(), elbow.z(), kArmThickness,
                   kArmIntensity);
    stroke_segment(img, cam, elbow.y(), elbow.z(), gripper.y(), gripper.z(), kArmThickness,
                   kArmIntensity);

    const double closure = s.joints.hand / 180.0;
    const double radius =
        kGripperOpenRadius - closure * (kGripperOpenRadius - kGripperClosedRadius);
    fill_disc(img, cam, gripper.y(), gripper.z(), radius, kGripperIntensity);

    // The target cube is painted last so the arm can never occlude it: the
    // camera's one job is to witness where the target is, and a target that
    // could be hidden behind the arm would let a policy fake "cube lifted"
    // scenes by posing the bare gripper in front of it.
    fill_rect(img, cam, s.cube_position.y(), s.cube_position.z(), half, half, kCubeIntensity);
    return img;
}

namespace {

double joint_value(const JointAngles& j, int idx) {
    switch (idx) {
        case 0: return j.shoulder_pitch;
        case 1: return j.shoulder_roll;
        case 2: return j.elbow_roll;
        default: return j.hand;
    }
}

void set_joint(JointAngles& j, int idx, double v) {
    switch (idx) {
        case 0: j.shoulder_pitch = v; break;
        case 1: j.shoulder_roll = v; break;
        case 2: j.elbow_roll = v; break;
        default: j.hand = v; break;
    }
}

}  // namespace

Vector4d scripted_expert(const WorldState& s, const EnvConfig& cfg) {
    if (ground_truth_success(s, cfg) || s.done) return Vector4d::Zero();

    if (s.grasped) {
        // Lift: raise the shoulder pitch, straighten the elbow, keep the hand shut.
        return {1.0, 0.0, -1.0, 1.0};
    }

    const Vector3d target = s.cube_position;
    const double target_radius = (target - shoulder_position(cfg)).norm();
    auto dist_at = [&](const JointAngles& j) {
        return (gripper_world(j, cfg) - target).norm();
    };
    // Radial reach error: monotone in the elbow angle, so the elbow line search
    // never stalls in a local minimum the way raw-distance coordinate descent can
    // (a straight arm overshooting the cube radially is such a trap).
    auto radial_err_at = [&](const JointAngles& j) {
        return std::abs(forward_kinematics(j, cfg).norm() - target_radius);
    };

    Vector4d action = Vector4d::Zero();
    JointAngles cand = s.joints;
    const int kSearchSteps = 24;
    auto line_search = [&](int idx, auto&& objective) {
        const double base = joint_value(cand, idx);
        double best_delta = 0.0, best = objective(cand);
        for (int k = 0; k <= kSearchSteps; ++k) {
            double delta = -cfg.omega_max + 2.0 * cfg.omega_max * k / kSearchSteps;
            JointAngles probe = cand;
            set_joint(probe, idx, clamp_angle(base + delta));
            double v = objective(probe);
            if (v < best - 1e-12) {
                best = v;
                best_delta = clamp_angle(base + delta) - base;
            }
        }
        set_joint(cand, idx, clamp_angle(base + best_delta));
        action[idx] = best_delta / cfg.omega_max;
    };
    line_search(2, radial_err_at);  // elbow sets the reach radius
    line_search(1, dist_at);        // shoulder roll aims the azimuth
    line_search(0, dist_at);        // shoulder pitch closes the in-plane angle

    // Close the hand once the gripper is within grasp range.
    if (dist_at(cand) <= cfg.grasp_radius) action[3] = 1.0;
    return action;
}

namespace {

using Setter = void (*)(EnvConfig&, const std::string&);

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

const std::map<std::string, Setter>& env_setters() {
    static const std::map<std::string, Setter> m = {
        {"upper_arm_len", [](EnvConfig& c, const std::string& v) { c.upper_arm_len = parse_double(v); }},
        {"forearm_len", [](EnvConfig& c, const std::string& v) { c.forearm_len = parse_double(v); }},
        {"table_height", [](EnvConfig& c, const std::string& v) { c.table_height = parse_double(v); }},
        {"cube_side", [](EnvConfig& c, const std::string& v) { c.cube_side = parse_double(v); }},
        {"grasp_radius", [](EnvConfig& c, const std::string& v) { c.grasp_radius = parse_double(v); }},
        {"hand_close_threshold",
         [](EnvConfig& c, const std::string& v) { c.hand_close_threshold = parse_double(v); }},
        {"lift_height", [](EnvConfig& c, const std::string& v) { c.lift_height = parse_double(v); }},
        {"omega_max", [](EnvConfig& c, const std::string& v) { c.omega_max = parse_double(v); }},
        {"shoulder_height",
         [](EnvConfig& c, const std::string& v) { c.shoulder_height = parse_double(v); }},
        {"max_steps", [](EnvConfig& c, const std::string& v) { c.max_steps = static_cast<int>(parse_long(v)); }},
        {"cam_width", [](EnvConfig& c, const std::string& v) { c.cam_width = static_cast<int>(parse_long(v)); }},
        {"cam_height", [](EnvConfig& c, const std::string& v) { c.cam_height = static_cast<int>(parse_long(v)); }},
        {"cube_x_lo", [](EnvConfig& c, const std::string& v) { c.cube_x_lo = parse_double(v); }},
        {"cube_x_hi", [](EnvConfig& c, const std::string& v) { c.cube_x_hi = parse_double(v); }},
        {"cube_y_lo", [](EnvConfig& c, const std::string& v) { c.cube_y_lo = parse_double(v); }},
        {"cube_y_hi", [](EnvConfig& c, const std::string& v) { c.cube_y_hi = parse_double(v); }},
        {"seed", [](EnvConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_long(v)); }},
    };
    return m;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_env_key(EnvConfig& cfg, const std::string& key, const std::string& value) {
    auto it = env_setters().find(key);
    if (it == env_setters().end()) throw UsageError("env config: unknown key '" + key + "'");
    it->second(cfg, value);
}

EnvConfig load_env_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open env config: " + path);
    EnvConfig cfg;
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
        apply_env_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void save_env_config(const std::string& path, const EnvConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot write env config: " + path);
    os << "# grab-and-lift environment configuration\n";
    os << "upper_arm_len = " << cfg.upper_arm_len << "\n";
    os << "forearm_len = " << cfg.forearm_len << "\n";
    os << "table_height = " << cfg.table_height << "\n";
    os << "cube_side = " << cfg.cube_side << "\n";
    os << "grasp_radius = " << cfg.grasp_radius << "\n";
    os << "hand_close_threshold = " << cfg.hand_close_threshold << "\n";
    os << "lift_height = " << cfg.lift_height << "\n";
    os << "omega_max = " << cfg.omega_max << "\n";
    os << "shoulder_height = " << cfg.shoulder_height << "\n";
    os << "max_steps = " << cfg.max_steps << "\n";
    os << "cam_width = " << cfg.cam_width << "\n";
    os << "cam_height = " << cfg.cam_height << "\n";
    os << "cube_x_lo = " << cfg.cube_x_lo << "\n";
    os << "cube_x_hi = " << cfg.cube_x_hi << "\n";
    os << "cube_y_lo = " << cfg.cube_y_lo << "\n";
    os << "cube_y_hi = " << cfg.cube_y_hi << "\n";
    os << "seed = " << cfg.seed << "\n";
}

}  // namespace rw::sim
