#pragma once

// State representations compared by the benchmark: raw pixels, PCA-compressed
// images, and the compact last-N-rewards window.

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rw/image.hpp"

namespace rw::state {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Variant : std::uint8_t { Pixels = 0, PcaImage = 1, RewardWindow = 2 };

struct StateSpec {
    Variant variant = Variant::RewardWindow;
    int width = 0, height = 0;  // Pixels: state resolution; PcaImage: source resolution
    int k = 50;                 // PcaImage component count
    int n = 15;                 // RewardWindow length
    // Resolution the reward classifier consumes (recorded for transparency).
    int reward_w = 32, reward_h = 24;

    static StateSpec pixels(int w, int h);
    static StateSpec pca_image(int k, int src_w, int src_h);
    static StateSpec reward_window(int n = 15);

    int dim() const;
    std::string str() const;
};

StateSpec parse_state_spec(const std::string& text);  // e.g. "pixels:80x60", "pca:50", "rewards:15"

struct PcaBasis {
    VectorXd mean;          // image-dim
    MatrixXd components;    // k x image-dim, rows orthonormal
    VectorXd explained;     // nonincreasing eigenvalues

    int k() const { return static_cast<int>(components.rows()); }
    int dim() const { return static_cast<int>(mean.size()); }
};

// Rows of `samples` are flattened images. Uses the m x m Gram matrix when the
// sample count is below the pixel dimension, the d x d covariance otherwise.
// Sign convention: the largest-magnitude entry of each component is positive.
PcaBasis fit_pca(const MatrixXd& samples, int k);

VectorXd pca_project(const PcaBasis& basis, const Image& img);
VectorXd pca_project(const PcaBasis& basis, const VectorXd& flat);
VectorXd pca_reconstruct(const PcaBasis& basis, const VectorXd& coords);

// Block-mean (area average) pooling; target must divide the source evenly.
Image downsample(const Image& img, int target_w, int target_h);

// Fixed-capacity FIFO of the last n rewards, zero-padded until n have been seen.
class RewardWindowBuffer {
  public:
    explicit RewardWindowBuffer(int n = 15);

    // Appends a reward (must be in [0,1]) and returns the encoded window,
    // oldest first.
    VectorXd push_and_encode(double reward);
    void reset();
    int capacity() const { return static_cast<int>(window_.size()); }
    VectorXd encoded() const { return window_; }

  private:
    VectorXd window_;
};

// Unified state encoding. For PcaImage the observation is downsampled to the
// basis resolution first when needed; `basis` may be null for other variants.
VectorXd encode(const StateSpec& spec, const Image& observation,
                const RewardWindowBuffer* window, const PcaBasis* basis);

// "RWPC" binary basis file.
void save_pca(const std::string& path, const PcaBasis& basis);
PcaBasis load_pca(const std::string& path);

}  // namespace rw::state
