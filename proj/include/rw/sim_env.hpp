#pragma once

// Deterministic kinematic grab-and-lift environment for a 4-joint arm,
// with a synthetic orthographic camera in place of the robot's mouth camera.

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>

#include "rw/image.hpp"

namespace rw::sim {

using Eigen::Vector3d;
using Eigen::Vector4d;

// All joints in degrees, clamped to [0, 180].
struct JointAngles {
    double shoulder_pitch = 90.0;
    double shoulder_roll = 90.0;
    double elbow_roll = 0.0;
    double hand = 0.0;

    bool operator==(const JointAngles&) const = default;
};

// Uniform sampling ranges for the reset pose; sessions shift these to vary the
// arm's workspace between capture sessions.
struct PoseRanges {
    double pitch_lo = 45.0, pitch_hi = 55.0;
    double roll_lo = 80.0, roll_hi = 100.0;
    double elbow_lo = 35.0, elbow_hi = 55.0;
    double hand_lo = 150.0, hand_hi = 170.0;

    PoseRanges shifted(double pitch_off, double roll_off, double elbow_off) const;
};

struct EnvConfig {
    double upper_arm_len = 0.18;
    double forearm_len = 0.22;
    double table_height = 0.75;
    double cube_side = 0.05;
    double grasp_radius = 0.06;
    double hand_close_threshold = 120.0;  // degrees
    double lift_height = 0.10;
    double omega_max = 12.0;  // degrees per step at |action| = 1
    double shoulder_height = 0.85;
    int max_steps = 50;
    int cam_width = 32;
    int cam_height = 24;
    // Cube placement region on the table (world x forward, y lateral).
    double cube_x_lo = 0.28, cube_x_hi = 0.32;
    double cube_y_lo = -0.03, cube_y_hi = 0.03;
    std::uint64_t seed = 0;

    PoseRanges reset_pose;  // not a config-file key; sessions override in code

    void validate() const;
};

struct WorldState {
    JointAngles joints;
    Vector3d cube_position = Vector3d::Zero();       // target cube center, world frame
    Vector3d distractor_position = Vector3d::Zero();  // second cube; rendered, never grasped
    bool grasped = false;
    int step_index = 0;
    bool done = false;

    bool operator==(const WorldState& o) const {
        return joints == o.joints && cube_position == o.cube_position &&
               distractor_position == o.distractor_position && grasped == o.grasped &&
               step_index == o.step_index && done == o.done;
    }
};

enum class DoneReason { Running, Success, Timeout };

struct StepResult {
    Image observation;
    bool ground_truth_success = false;
    bool done = false;
    DoneReason done_reason = DoneReason::Running;
};

// Gripper position relative to the shoulder. Zero pose (pitch=90, roll=90,
// elbow=0) points the straightened arm along +x.
Vector3d forward_kinematics(const JointAngles& joints, const EnvConfig& cfg);

// Gripper position in the world frame (shoulder sits at (0,0,shoulder_height)).
Vector3d gripper_world(const JointAngles& joints, const EnvConfig& cfg);

bool ground_truth_success(const WorldState& s, const EnvConfig& cfg);

// Seeded reset: randomized rest pose and cube placement on the table inside the
// reachable workspace. Throws UsageError when rejection sampling cannot place
// the cube or the arm within 100 tries.
WorldState reset(const EnvConfig& cfg, std::uint64_t episode_seed);

// Joint-velocity action, components clamped to [-1,1]. Throws ContractError
// when stepping a done episode.
std::pair<WorldState, StepResult> step(const WorldState& s, const Vector4d& action,
                                       const EnvConfig& cfg);

// Deterministic orthographic grayscale render of the scene.
Image render(const WorldState& s, const EnvConfig& cfg);

// Deterministic demonstration policy: greedy per-joint angle search that reduces
// the gripper-cube distance, closes the hand within grasp range, lifts after
// grasping. Returns the zero action at success.
Vector4d scripted_expert(const WorldState& s, const EnvConfig& cfg);

// Distance from gripper to cube center.
double gripper_cube_distance(const WorldState& s, const EnvConfig& cfg);

// Key=value config file ('#' comments, blank lines ok); unknown keys are errors.
EnvConfig load_env_config(const std::string& path);
void apply_env_key(EnvConfig& cfg, const std::string& key, const std::string& value);
void save_env_config(const std::string& path, const EnvConfig& cfg);

}  // namespace rw::sim
