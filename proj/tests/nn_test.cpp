#include <doctest.h>

#include <random>
#include <sstream>

#include "rw/nn.hpp"

using namespace rw;
using nn::LayerSpec;
using nn::Mat;
using nn::Shape;

TEST_CASE("softmax of symmetric logits is uniform") {
    auto net = nn::build_network(Shape{{2}}, {LayerSpec::softmax()}, 0);
    Mat in(1, 2);
    in << 0.0, 0.0;
    Mat out = nn::forward(net, in);
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("relu zeroes negatives and passes positives") {
    auto net = nn::build_network(Shape{{3}}, {LayerSpec::relu()}, 0);
    Mat in(1, 3);
    in << -1.0, 0.0, 2.0;
    Mat out = nn::forward(net, in);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 0.0);
    CHECK(out(0, 2) == 2.0);
}

TEST_CASE("dense identity weights reproduce the input") {
    auto net = nn::build_network(Shape{{2}}, {LayerSpec::dense(2, 2)}, 0);
    net.weights[0] = Mat::Identity(2, 2);
    net.biases[0].setZero();
    Mat in(1, 2);
    in << 3.0, 4.0;
    Mat out = nn::forward(net, in);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(0, 1) == 4.0);
}

TEST_CASE("zero output gradient yields zero parameter gradients") {
    auto net = nn::build_network(Shape{{3}}, {LayerSpec::dense(3, 4), LayerSpec::tanh()}, 7);
    Mat in = Mat::Random(2, 3);
    nn::Tape tape;
    nn::forward(net, in, &tape);
    auto g = nn::backward(net, tape, Mat::Zero(2, 4));
    CHECK(g.w[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.b[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar dense chain rule by hand") {
    auto net = nn::build_network(Shape{{1}}, {LayerSpec::dense(1, 1)}, 0);
    net.weights[0](0, 0) = 2.0;
    net.biases[0][0] = 0.0;
    Mat in(1, 1);
    in << 3.0;
    nn::Tape tape;
    nn::forward(net, in, &tape);
    Mat dout(1, 1);
    dout << 1.0;  // loss = y
    Mat dinput;
    auto g = nn::backward(net, tape, dout, &dinput);
    CHECK(g.w[0](0, 0) == doctest::Approx(3.0));
    CHECK(g.b[0][0] == doctest::Approx(1.0));
    CHECK(dinput(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("three-layer net matches central finite differences") {
    auto net = nn::build_network(
        Shape{{5}},
        {LayerSpec::dense(5, 8), LayerSpec::relu(), LayerSpec::dense(8, 3)}, 21);
    CHECK(nn::grad_check(net, nn::GradCheckLoss::WeightedSum, 3) <= 1e-5);
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
    auto net = nn::build_network(Shape{{2}}, {LayerSpec::dense(2, 2)}, 5);
    Mat before = net.weights[0];
    auto st = nn::make_adam(net, 1e-3);
    nn::adam_step(net, nn::zero_gradients(net), st);
    CHECK(st.t == 1);
    CHECK(net.weights[0] == before);
}

TEST_CASE("adam descends against a constant gradient") {
    auto net = nn::build_network(Shape{{1}}, {LayerSpec::dense(1, 1)}, 5);
    net.weights[0](0, 0) = 0.0;
    auto st = nn::make_adam(net, 1e-3);
    auto g = nn::zero_gradients(net);
    g.w[0](0, 0) = 2.5;
    for (int i = 0; i < 200; ++i) nn::adam_step(net, g, st);
    CHECK(net.weights[0](0, 0) < 0.0);
    CHECK(st.t == 200);
}

TEST_CASE("first adam step with unit gradient moves by the learning rate") {
    auto net = nn::build_network(Shape{{1}}, {LayerSpec::dense(1, 1)}, 5);
    const double w0 = net.weights[0](0, 0);
    auto st = nn::make_adam(net, 1e-3);
    auto g = nn::zero_gradients(net);
    g.w[0](0, 0) = 1.0;
    nn::adam_step(net, g, st);
    // Bias-corrected first step: lr * g / (|g| + eps') ~= lr.
    CHECK(net.weights[0](0, 0) == doctest::Approx(w0 - 1e-3).epsilon(1e-4));
}

TEST_CASE("adam rejects non-finite gradients") {
    auto net = nn::build_network(Shape{{1}}, {LayerSpec::dense(1, 1)}, 5);
    auto st = nn::make_adam(net, 1e-3);
    auto g = nn::zero_gradients(net);
    g.w[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nn::adam_step(net, g, st), NumericError);
}

TEST_CASE("gradient check on a dense-only net") {
    auto net = nn::build_network(
        Shape{{6}},
        {LayerSpec::dense(6, 10), LayerSpec::tanh(), LayerSpec::dense(10, 4)}, 11);
    CHECK(nn::grad_check(net, nn::GradCheckLoss::WeightedSum, 1) <= 1e-6);
}

TEST_CASE("gradient check on a conv-pool-relu net") {
    auto net = nn::build_network(
        Shape{{1, 8, 8}},
        {LayerSpec::conv2d(1, 3), LayerSpec::relu(), LayerSpec::maxpool2d(),
         LayerSpec::conv2d(3, 4), LayerSpec::relu(), LayerSpec::maxpool2d(),
         LayerSpec::flatten(), LayerSpec::dense(4 * 2 * 2, 5)},
        13);
    CHECK(nn::grad_check(net, nn::GradCheckLoss::WeightedSum, 2) <= 1e-4);
}

TEST_CASE("gradient check on a tanh-head actor net") {
    auto net = nn::build_network(
        Shape{{15}},
        {LayerSpec::dense(15, 16), LayerSpec::relu(), LayerSpec::dense(16, 4),
         LayerSpec::tanh()},
        17);
    CHECK(nn::grad_check(net, nn::GradCheckLoss::WeightedSum, 4) <= 1e-6);
}

TEST_CASE("gradient check through softmax cross-entropy") {
    auto net = nn::build_network(
        Shape{{1, 6, 6}},
        {LayerSpec::conv2d(1, 2), LayerSpec::relu(), LayerSpec::maxpool2d(),
         LayerSpec::flatten(), LayerSpec::dense(2 * 3 * 3, 2), LayerSpec::softmax()},
        19);
    CHECK(nn::grad_check(net, nn::GradCheckLoss::SoftmaxXent, 5) <= 1e-4);
}

TEST_CASE("softmax output is a probability vector for random logits") {
    auto net = nn::build_network(Shape{{7}}, {LayerSpec::softmax()}, 0);
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> logit(-50.0, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        Mat in(1, 7);
        for (int i = 0; i < 7; ++i) in(0, i) = logit(rng);
        Mat out = nn::forward(net, in);
        CHECK(out.minCoeff() >= 0.0);
        CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("conv keeps spatial dims and maxpool halves them") {
    auto net = nn::build_network(
        Shape{{1, 10, 14}}, {LayerSpec::conv2d(1, 4), LayerSpec::maxpool2d()}, 3);
    CHECK(net.out_shapes[0] == Shape{{4, 10, 14}});
    CHECK(net.out_shapes[1] == Shape{{4, 5, 7}});
    // Odd dims floor.
    auto odd = nn::build_network(Shape{{2, 5, 7}}, {LayerSpec::maxpool2d()}, 3);
    CHECK(odd.out_shapes[0] == Shape{{2, 2, 3}});
}

TEST_CASE("forward is deterministic") {
    auto net = nn::build_network(
        Shape{{1, 8, 8}},
        {LayerSpec::conv2d(1, 3), LayerSpec::relu(), LayerSpec::maxpool2d(),
         LayerSpec::flatten(), LayerSpec::dense(3 * 4 * 4, 2), LayerSpec::softmax()},
        23);
    Mat in = Mat::Random(3, 64);
    Mat a = nn::forward(net, in);
    Mat b = nn::forward(net, in);
    CHECK(a == b);
}

TEST_CASE("cross-entropy is nonnegative and zero only at the target vertex") {
    Mat logits(1, 3);
    logits << 40.0, -40.0, -40.0;  // softmax ~ one-hot on class 0
    CHECK(nn::softmax_xent(logits, {0}) == doctest::Approx(0.0).epsilon(1e-9));
    logits << 1.0, 2.0, 0.5;
    CHECK(nn::softmax_xent(logits, {1}) > 0.0);
    CHECK(nn::softmax_xent(logits, {2}) > nn::softmax_xent(logits, {1}));
}

TEST_CASE("network serialization round-trips bit-exactly") {
    auto net = nn::build_network(
        Shape{{1, 8, 8}},
        {LayerSpec::conv2d(1, 3), LayerSpec::relu(), LayerSpec::maxpool2d(),
         LayerSpec::flatten(), LayerSpec::dense(3 * 4 * 4, 6), LayerSpec::tanh()},
        29);
    std::stringstream ss;
    nn::save_network(ss, net);
    auto back = nn::load_network(ss);
    REQUIRE(back.layers.size() == net.layers.size());
    CHECK(back.input_shape == net.input_shape);
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        CHECK(back.weights[i] == net.weights[i]);
        CHECK(back.biases[i] == net.biases[i]);
    }
    Mat in = Mat::Random(2, 64);
    CHECK(nn::forward(net, in) == nn::forward(back, in));
}

TEST_CASE("build rejects inconsistent layer chains") {
    CHECK_THROWS_AS(
        nn::build_network(Shape{{4}}, {LayerSpec::dense(5, 2)}, 0), ContractError);
    CHECK_THROWS_AS(
        nn::build_network(Shape{{1, 8, 8}},
                          {LayerSpec::conv2d(2, 3)}, 0),
        ContractError);
}
