#include <doctest.h>

#include <cstdio>

#include "rw/errors.hpp"
#include "rw/reward_model.hpp"

using namespace rw;
using data::Label;

namespace {

// 3 tiny sessions are enough to exercise the training loop end to end.
data::DatasetSplit tiny_split(int n_success = 8, int n_nonsuccess = 12) {
    sim::EnvConfig cfg;
    std::vector<data::CaptureSession> sessions;
    for (int i = 0; i < 3; ++i)
        sessions.push_back(data::generate_session(cfg, i, 99, n_success, n_nonsuccess));
    return data::split_sessions(std::move(sessions));
}

// Forces constant logits so the argmax is a fixed class.
reward::Classifier constant_predictor(int w, int h, double success_logit) {
    auto clf = reward::make_classifier(w, h, 0);
    auto& net = clf.net;
    const std::size_t last = net.layers.size() - 2;  // final Dense, before Softmax
    net.weights[last].setZero();
    net.biases[last][0] = 0.0;
    net.biases[last][1] = success_logit;
    return clf;
}

}  // namespace

TEST_CASE("a zeroed head predicts exactly one half") {
    auto clf = constant_predictor(32, 24, 0.0);
    Image img(32, 24);
    img.pixels.setConstant(0.3);
    CHECK(reward::predict_success(clf, img) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("prediction rejects mismatched resolutions") {
    auto clf = reward::make_classifier(32, 24, 0);
    Image img(16, 12);
    CHECK_THROWS_AS(reward::predict_success(clf, img), ContractError);
}

TEST_CASE("success and non-success probabilities are complementary") {
    auto clf = reward::make_classifier(16, 12, 7);
    Image img(16, 12);
    img.pixels.setRandom();
    img.pixels = (img.pixels.array() + 1.0) / 2.0;
    nn::Mat out = nn::forward(clf.net, img.pixels.transpose());
    CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(reward::predict_success(clf, img) == doctest::Approx(out(0, 1)));
}

TEST_CASE("a constant non-success predictor scores the class ratio") {
    sim::EnvConfig cfg;
    auto session = data::generate_session(cfg, 0, 5, 20, 44);
    auto clf = constant_predictor(cfg.cam_width, cfg.cam_height, -5.0);
    CHECK(reward::evaluate_accuracy(clf, session) == doctest::Approx(44.0 / 64.0));
}

TEST_CASE("probability ties resolve toward non-success") {
    sim::EnvConfig cfg;
    auto session = data::generate_session(cfg, 0, 20, 44, 20);
    auto tied = constant_predictor(cfg.cam_width, cfg.cam_height, 0.0);
    // All predictions are 0.5/0.5; every image counts as NonSuccess.
    CHECK(reward::evaluate_accuracy(tied, session) ==
          doctest::Approx(double(session.count(Label::NonSuccess)) / session.images.size()));
}

TEST_CASE("empty sessions cannot be scored") {
    auto clf = reward::make_classifier(32, 24, 0);
    data::CaptureSession empty;
    CHECK_THROWS_AS(reward::evaluate_accuracy(clf, empty), ContractError);
}

TEST_CASE("training is deterministic per seed") {
    auto split = tiny_split();
    auto [clf_a, rep_a] = reward::train_classifier(split, 2, 8, 31);
    auto [clf_b, rep_b] = reward::train_classifier(split, 2, 8, 31);
    CHECK(rep_a.train_loss == rep_b.train_loss);
    CHECK(rep_a.val_accuracy == rep_b.val_accuracy);
    CHECK(rep_a.test_accuracy == rep_b.test_accuracy);
    CHECK(rep_a.best_epoch == rep_b.best_epoch);
    for (std::size_t l = 0; l < clf_a.net.weights.size(); ++l)
        CHECK(clf_a.net.weights[l] == clf_b.net.weights[l]);
}

TEST_CASE("training beats the majority-class baseline quickly") {
    auto split = tiny_split(20, 44);
    auto [clf, rep] = reward::train_classifier(split, 5, 8, 1);
    REQUIRE(rep.train_accuracy.size() == 5);
    CHECK(rep.train_accuracy.back() > 44.0 / 64.0);
}

TEST_CASE("the report tracks epochs and selection bookkeeping") {
    auto split = tiny_split();
    auto [clf, rep] = reward::train_classifier(split, 3, 8, 2);
    CHECK(rep.epochs == 3);
    CHECK(rep.batch_size == 8);
    CHECK(rep.train_loss.size() == 3);
    CHECK(rep.val_loss.size() == 3);
    CHECK(rep.best_epoch >= 0);
    CHECK(rep.best_epoch < 3);
    CHECK(rep.test_accuracy >= 0.0);
    CHECK(rep.test_accuracy <= 1.0);
    // Selected epoch is the argmax of validation accuracy.
    for (double v : rep.val_accuracy) CHECK(rep.val_accuracy[rep.best_epoch] >= v);
}

TEST_CASE("empty split partitions are rejected") {
    auto split = tiny_split();
    split.validation.clear();
    CHECK_THROWS_AS(reward::train_classifier(split, 1, 8, 0), ContractError);
}

TEST_CASE("classifier files round-trip to identical predictions") {
    auto split = tiny_split();
    auto [clf, rep] = reward::train_classifier(split, 1, 8, 3);
    const std::string path = "classifier_roundtrip_test.rwcl";
    reward::save_classifier(path, clf);
    auto back = reward::load_classifier(path);
    CHECK(back.width == clf.width);
    CHECK(back.height == clf.height);
    for (const auto& s : split.test)
        for (const auto& li : s.images)
            CHECK(reward::predict_success(back, li.image) ==
                  reward::predict_success(clf, li.image));
    std::remove(path.c_str());
}
