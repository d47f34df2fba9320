#include "rw/reward_model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "rw/errors.hpp"
#include "rw/io.hpp"

namespace rw::reward {

Classifier make_classifier(int width, int height, std::uint64_t seed) {
    if (width < 8 || height < 8)
        throw ContractError("classifier: input must be at least 8x8");
    const int h3 = height / 2 / 2 / 2;
    const int w3 = width / 2 / 2 / 2;
    const int flat = 64 * h3 * w3;
    std::vector<nn::LayerSpec> layers = {
        nn::LayerSpec::conv2d(1, 16),  nn::LayerSpec::relu(), nn::LayerSpec::maxpool2d(),
        nn::LayerSpec::conv2d(16, 32), nn::LayerSpec::relu(), nn::LayerSpec::maxpool2d(),
        nn::LayerSpec::conv2d(32, 64), nn::LayerSpec::relu(), nn::LayerSpec::maxpool2d(),
        nn::LayerSpec::flatten(),
        nn::LayerSpec::dense(flat, 128), nn::LayerSpec::relu(),
        nn::LayerSpec::dense(128, 2),
        nn::LayerSpec::softmax(),
    };
    Classifier clf;
    clf.width = width;
    clf.height = height;
    clf.net = nn::build_network(nn::Shape{{1, height, width}}, std::move(layers), seed);
    return clf;
}

namespace {

struct FlatData {
    nn::Mat x;                // n x (h*w)
    std::vector<int> labels;  // 1 = Success
};

FlatData flatten_sessions(const std::vector<data::CaptureSession>& sessions, int w, int h,
                          const char* what) {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.images.size();
    if (n == 0) throw ContractError(std::string("train_classifier: empty ") + what + " partition");
    FlatData d;
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w) * h);
    d.labels.reserve(n);
    Eigen::Index r = 0;
    for (const auto& s : sessions) {
        for (const auto& li : s.images) {
            require_same_resolution(li.image, w, h, what);
            d.x.row(r++) = li.image.pixels.transpose();
            d.labels.push_back(li.label == data::Label::Success ? 1 : 0);
        }
    }
    return d;
}

// Argmax accuracy with ties toward NonSuccess (class 0).
double accuracy_on(const Classifier& clf, const FlatData& d) {
    nn::Mat probs = nn::forward(clf.net, d.x);
    int correct = 0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        int pred = probs(r, 1) > probs(r, 0) ? 1 : 0;
        correct += (pred == d.labels[static_cast<std::size_t>(r)]) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

double mean_xent(const Classifier& clf, const FlatData& d) {
    nn::Tape tape;
    nn::forward(clf.net, d.x, &tape);
    // Logits are the input of the trailing softmax layer.
    return nn::softmax_xent(tape.acts[clf.net.layers.size() - 1], d.labels);
}

}  // namespace

std::pair<Classifier, TrainReport> train_classifier(const data::DatasetSplit& split,
                                                    int epochs, int batch_size,
                                                    std::uint64_t seed, double learning_rate) {
    if (epochs < 1) throw ContractError("train_classifier: epochs must be >= 1");
    if (batch_size < 1) throw ContractError("train_classifier: batch_size must be >= 1");
    if (split.train.empty() || split.train[0].images.empty())
        throw ContractError("train_classifier: empty train partition");

    const int w = split.train[0].images[0].image.width;
    const int h = split.train[0].images[0].image.height;
    FlatData train = flatten_sessions(split.train, w, h, "train");
    FlatData val = flatten_sessions(split.validation, w, h, "validation");
    FlatData test = flatten_sessions(split.test, w, h, "test");

    Classifier clf = make_classifier(w, h, seed);
    nn::AdamState adam = nn::make_adam(clf.net, learning_rate);
    std::mt19937_64 rng(seed);

    TrainReport report;
    report.epochs = epochs;
    report.batch_size = batch_size;
    report.seed = seed;

    const Eigen::Index n = train.x.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const int logits_layer = static_cast<int>(clf.net.layers.size()) - 2;

    Classifier best = clf;
    double best_val = -1.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        long loss_batches = 0;
        for (Eigen::Index start = 0; start < n; start += batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(batch_size, n - start);
            nn::Mat xb(b, train.x.cols());
            std::vector<int> yb(static_cast<std::size_t>(b));
            for (Eigen::Index i = 0; i < b; ++i) {
                xb.row(i) = train.x.row(order[static_cast<std::size_t>(start + i)]);
                yb[static_cast<std::size_t>(i)] =
                    train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
            }
            nn::Tape tape;
            nn::forward(clf.net, xb, &tape);
            nn::Mat dlogits;
            loss_sum += nn::softmax_xent(tape.acts[clf.net.layers.size() - 1], yb, &dlogits);
            ++loss_batches;
            nn::Gradients g = nn::backward(clf.net, tape, dlogits, nullptr, logits_layer);
            nn::adam_step(clf.net, g, adam);
        }
        report.train_loss.push_back(loss_sum / static_cast<double>(loss_batches));
        report.train_accuracy.push_back(accuracy_on(clf, train));
        report.val_loss.push_back(mean_xent(clf, val));
        report.val_accuracy.push_back(accuracy_on(clf, val));
        if (report.val_accuracy.back() > best_val) {
            best_val = report.val_accuracy.back();
            best = clf;
            report.best_epoch = epoch;
        }
    }
    report.test_accuracy = accuracy_on(best, test);
    return {std::move(best), std::move(report)};
}

double predict_success(const Classifier& clf, const Image& img) {
    require_same_resolution(img, clf.width, clf.height, "predict_success");
    nn::Mat x = img.pixels.transpose();
    nn::Mat probs = nn::forward(clf.net, x);
    return probs(0, 1);
}

Eigen::VectorXd predict_success_batch(const Classifier& clf, const nn::Mat& images) {
    if (images.cols() != static_cast<Eigen::Index>(clf.width) * clf.height)
        throw ContractError("predict_success_batch: resolution mismatch");
    nn::Mat probs = nn::forward(clf.net, images);
    return probs.col(1);
}

double evaluate_accuracy(const Classifier& clf, const data::CaptureSession& session) {
    if (session.images.empty()) throw ContractError("evaluate_accuracy: empty session");
    FlatData d = flatten_sessions({session}, clf.width, clf.height, "session");
    return accuracy_on(clf, d);
}

double evaluate_accuracy(const Classifier& clf,
                         const std::vector<data::CaptureSession>& sessions) {
    FlatData d = flatten_sessions(sessions, clf.width, clf.height, "sessions");
    return accuracy_on(clf, d);
}

namespace {
constexpr char kMagic[4] = {'R', 'W', 'C', 'L'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_classifier(const std::string& path, const Classifier& clf) {
    auto os = io::open_out(path);
    io::write_magic(os, kMagic);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(clf.width));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(clf.height));
    nn::save_network(os, clf.net);
}

Classifier load_classifier(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, kMagic, "classifier");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        throw FormatError("unsupported classifier version " + std::to_string(version));
    Classifier clf;
    clf.width = io::read_le<std::uint16_t>(is);
    clf.height = io::read_le<std::uint16_t>(is);
    clf.net = nn::load_network(is);
    if (clf.net.output_shape().flat() != 2)
        throw FormatError("classifier: embedded network is not binary");
    return clf;
}

}  // namespace rw::reward
