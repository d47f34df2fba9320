#pragma once

// Small dense/conv network engine with manual backprop and Adam.
// Activations are batched: Mat rows are samples, columns the flattened
// per-sample data in row-major [C,H,W] (or [D]) order.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rw/errors.hpp"

namespace rw::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class LayerKind : std::uint8_t {
    Dense = 0,
    Conv2d = 1,     // 3x3 kernel, stride 1, same padding
    MaxPool2d = 2,  // 2x2 window, stride 2, floor
    Relu = 3,
    Tanh = 4,
    Flatten = 5,
    Softmax = 6,
};

struct LayerSpec {
    LayerKind kind;
    int in = 0;   // Dense: in features; Conv2d: in channels
    int out = 0;  // Dense: out features; Conv2d: out channels

    static LayerSpec dense(int in, int out) { return {LayerKind::Dense, in, out}; }
    static LayerSpec conv2d(int in_ch, int out_ch) { return {LayerKind::Conv2d, in_ch, out_ch}; }
    static LayerSpec maxpool2d() { return {LayerKind::MaxPool2d, 0, 0}; }
    static LayerSpec relu() { return {LayerKind::Relu, 0, 0}; }
    static LayerSpec tanh() { return {LayerKind::Tanh, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0}; }
    static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0}; }
};

// [D] for vectors, [C,H,W] for images.
struct Shape {
    std::vector<int> dims;
    int flat() const {
        int n = 1;
        for (int d : dims) n *= d;
        return n;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

struct Network {
    Shape input_shape;
    std::vector<LayerSpec> layers;
    std::vector<Shape> out_shapes;  // out_shapes[i] = output shape of layer i
    std::vector<Mat> weights;       // Dense: out x in; Conv2d: out_ch x (in_ch*9); else empty
    std::vector<Vec> biases;
    std::uint64_t init_seed = 0;

    const Shape& output_shape() const { return out_shapes.back(); }
    int param_count() const;
};

// Validates shape chaining and Glorot-initializes weights (biases zero).
Network build_network(Shape input, std::vector<LayerSpec> layers, std::uint64_t seed);

struct Tape {
    std::vector<Mat> acts;  // acts[0]=input, acts[i+1]=output of layer i
    // Per MaxPool layer: argmax source index (into the layer's flat input) per output cell.
    std::vector<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>> pool_argmax;
};

// input: batch x input_shape.flat(). tape optional (needed for backward).
Mat forward(const Network& net, const Mat& input, Tape* tape = nullptr);

struct Gradients {
    std::vector<Mat> w;
    std::vector<Vec> b;
};

Gradients zero_gradients(const Network& net);

// dout is dLoss/d(output of layer `from_layer`); from_layer = -1 means the last
// layer. Trailing layers past from_layer are skipped (used to fuse softmax with
// cross-entropy). If dinput is non-null it receives dLoss/d(input).
Gradients backward(const Network& net, const Tape& tape, const Mat& dout,
                   Mat* dinput = nullptr, int from_layer = -1);

struct AdamState {
    std::vector<Mat> m_w, v_w;
    std::vector<Vec> m_b, v_b;
    long t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const Network& net, double lr);

// Standard Adam with bias correction; throws NumericError on non-finite gradients.
void adam_step(Network& net, const Gradients& g, AdamState& st);

// Row-wise stable softmax (helper; also what the Softmax layer computes).
Mat softmax_rows(const Mat& logits);

// Mean cross-entropy of softmax(logits) against integer labels; dlogits gets the
// fused gradient (p - onehot)/batch.
double softmax_xent(const Mat& logits, const std::vector<int>& labels, Mat* dlogits = nullptr);

enum class GradCheckLoss {
    WeightedSum,  // loss = sum(c .* output), c fixed random
    SoftmaxXent,  // net must end in Softmax; CE against random labels, fused backward
};

// Max over parameters of |analytic-numeric| / max(1e-8, |analytic|+|numeric|),
// central differences at the given eps.
double grad_check(const Network& net, GradCheckLoss loss, std::uint64_t seed, double eps = 1e-5);

// "RWNN" binary format; round-trips bit-exactly.
void save_network(std::ostream& os, const Network& net);
Network load_network(std::istream& is);
void save_network_file(const std::string& path, const Network& net);
Network load_network_file(const std::string& path);

}  // namespace rw::nn
