#pragma once

// Labeled success/non-success capture sessions for classifier training.

#include <cstdint>
#include <string>
#include <vector>

#include "rw/image.hpp"
#include "rw/sim_env.hpp"

namespace rw::data {

enum class Label : std::uint8_t { NonSuccess = 0, Success = 1 };

struct LabeledImage {
    Image image;
    Label label = Label::NonSuccess;
};

struct CaptureSession {
    int session_id = 0;
    std::uint64_t seed = 0;
    std::vector<LabeledImage> images;

    int count(Label l) const;
};

struct DatasetSplit {
    std::vector<CaptureSession> train;       // 8 sessions by default
    std::vector<CaptureSession> validation;  // 1
    std::vector<CaptureSession> test;        // 1
};

// One capture session: n_success at-goal frames (expert terminal observations
// mixed with randomly posed grasped scenes at goal height), plus non-success
// frames split between near-miss poses (open-hand approaches and grasped holds
// below the goal) and far random poses. Each session shifts the arm's reset
// ranges to vary its workspace. Deterministic given (session_id, seed).
CaptureSession generate_session(const sim::EnvConfig& cfg, int session_id,
                                std::uint64_t seed, int n_success = 200,
                                int n_nonsuccess = 440);

// Lowest session ids train, next validation, highest test (8:1:1 by count).
DatasetSplit split_sessions(std::vector<CaptureSession> sessions);

// "RWDS" binary format (u8 pixels); see save for the exact layout.
void save_dataset(const std::string& path, const std::vector<CaptureSession>& sessions);
std::vector<CaptureSession> load_dataset(const std::string& path);

// Header + per-image size in bytes for a file with these parameters; load
// verifies the actual size against this.
std::size_t dataset_file_size(int width, int height,
                              const std::vector<CaptureSession>& sessions);

// Pixels quantize to u8 on save and dequantize on load; applying this to an
// image yields exactly what a save/load round-trip yields.
Image quantize_roundtrip(const Image& img);

}  // namespace rw::data
