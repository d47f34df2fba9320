#pragma once

// Probabilistic task-success classifier; its softmax confidence is the reward.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rw/dataset.hpp"
#include "rw/image.hpp"
#include "rw/nn.hpp"

namespace rw::reward {

// Conv(1->16)-Relu-Pool / Conv(16->32)-Relu-Pool / Conv(32->64)-Relu-Pool /
// Flatten / Dense(128)-Relu / Dense(2) / Softmax, on grayscale input.
struct Classifier {
    int width = 0;
    int height = 0;
    nn::Network net;
};

Classifier make_classifier(int width, int height, std::uint64_t seed);

struct TrainReport {
    std::vector<double> train_loss, train_accuracy;
    std::vector<double> val_loss, val_accuracy;
    double test_accuracy = 0.0;
    int best_epoch = 0;  // 0-based epoch whose parameters were selected
    int epochs = 0;
    int batch_size = 0;
    std::uint64_t seed = 0;
};

// Minibatch Adam on softmax cross-entropy with seeded shuffling; returns the
// parameters of the best-validation-accuracy epoch; test accuracy is measured
// once, after selection.
std::pair<Classifier, TrainReport> train_classifier(const data::DatasetSplit& split,
                                                    int epochs = 10, int batch_size = 32,
                                                    std::uint64_t seed = 0,
                                                    double learning_rate = 1e-3);

// Softmax probability of the Success class. Throws on resolution mismatch.
double predict_success(const Classifier& clf, const Image& img);

// Batched variant (rows = flattened images at the classifier's resolution).
Eigen::VectorXd predict_success_batch(const Classifier& clf, const nn::Mat& images);

// Fraction of images whose argmax class matches the label; ties break toward
// NonSuccess. Throws on an empty session.
double evaluate_accuracy(const Classifier& clf, const data::CaptureSession& session);
double evaluate_accuracy(const Classifier& clf,
                         const std::vector<data::CaptureSession>& sessions);

// "RWCL" container: resolution header + embedded RWNN payload.
void save_classifier(const std::string& path, const Classifier& clf);
Classifier load_classifier(const std::string& path);

}  // namespace rw::reward
