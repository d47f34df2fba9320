#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <random>

#include "rw/errors.hpp"
#include "rw/state_repr.hpp"

using namespace rw;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using state::PcaBasis;
using state::RewardWindowBuffer;
using state::StateSpec;

namespace {

MatrixXd random_images(int m, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pix(0.0, 1.0);
    MatrixXd x(m, d);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c) x(r, c) = pix(rng);
    return x;
}

// Independent PCA oracle: explicit d x d covariance eigendecomposition.
PcaBasis direct_pca(const MatrixXd& samples, int k) {
    const VectorXd mean = samples.colwise().mean();
    MatrixXd centered = samples.rowwise() - mean.transpose();
    MatrixXd cov = centered.transpose() * centered / double(samples.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    PcaBasis b;
    b.mean = mean;
    b.components.resize(k, samples.cols());
    b.explained.resize(k);
    for (int i = 0; i < k; ++i) {
        VectorXd v = es.eigenvectors().col(samples.cols() - 1 - i);  // ascending order
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        b.components.row(i) = v.transpose();
        b.explained[i] = es.eigenvalues()[samples.cols() - 1 - i];
    }
    return b;
}

double reconstruction_error(const MatrixXd& samples, const PcaBasis& b) {
    double err = 0.0;
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        VectorXd x = samples.row(r);
        VectorXd back = state::pca_reconstruct(b, state::pca_project(b, x));
        err += (x - back).squaredNorm();
    }
    return err;
}

}  // namespace

TEST_CASE("axis-aligned cloud gives the positive axis component") {
    MatrixXd pts(5, 2);
    pts << -2, 0, -1, 0, 0, 0, 1, 0, 2, 0;
    auto b = state::fit_pca(pts, 1);
    CHECK(b.components(0, 0) == doctest::Approx(1.0));
    CHECK(b.components(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("reconstruction error is nonincreasing in the component count") {
    auto x = random_images(20, 12, 5);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
        double err = reconstruction_error(x, state::fit_pca(x, k));
        CHECK(err <= prev + 1e-9);
        prev = err;
    }
}

TEST_CASE("gram-trick components match the direct eigendecomposition") {
    // m < d forces the Gram path; the oracle always uses the d x d covariance.
    auto x = random_images(32, 64, 9);
    auto gram = state::fit_pca(x, 8);
    auto direct = direct_pca(x, 8);
    CHECK((gram.components - direct.components).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((gram.mean - direct.mean).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("covariance path agrees with the oracle too") {
    auto x = random_images(64, 16, 10);  // m >= d: covariance path
    auto got = state::fit_pca(x, 6);
    auto want = direct_pca(x, 6);
    CHECK((got.components - want.components).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("components are orthonormal with nonincreasing variances") {
    auto x = random_images(40, 30, 11);
    auto b = state::fit_pca(x, 10);
    MatrixXd gram = b.components * b.components.transpose();
    CHECK((gram - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-8);
    for (int i = 1; i < 10; ++i) {
        CHECK(b.explained[i] <= b.explained[i - 1] + 1e-12);
        CHECK(b.explained[i] >= -1e-12);
    }
}

TEST_CASE("oversized component counts are rejected") {
    auto x = random_images(10, 6, 12);
    CHECK_THROWS_AS(state::fit_pca(x, 7), ContractError);   // k > d
    auto y = random_images(5, 30, 12);
    CHECK_THROWS_AS(state::fit_pca(y, 5), ContractError);   // k > m-1
}

TEST_CASE("projection centers the data") {
    auto x = random_images(25, 9, 13);
    auto b = state::fit_pca(x, 4);
    CHECK(state::pca_project(b, b.mean).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("projection recovers component coordinates") {
    auto x = random_images(25, 9, 14);
    auto b = state::fit_pca(x, 4);
    for (int j = 0; j < 4; ++j) {
        VectorXd p = state::pca_project(b, VectorXd(b.mean + 2.5 * b.components.row(j).transpose()));
        for (int i = 0; i < 4; ++i)
            CHECK(p[i] == doctest::Approx(i == j ? 2.5 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("round-trip is exact inside the basis span") {
    auto x = random_images(25, 9, 15);
    auto b = state::fit_pca(x, 4);
    VectorXd coords(4);
    coords << 0.3, -1.2, 2.0, 0.7;
    VectorXd inside = b.mean + b.components.transpose() * coords;
    VectorXd back = state::pca_reconstruct(b, state::pca_project(b, inside));
    CHECK((inside - back).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("projection is linear after centering") {
    auto x = random_images(25, 9, 16);
    auto b = state::fit_pca(x, 4);
    VectorXd u = VectorXd::Random(9), v = VectorXd::Random(9);
    VectorXd lhs = state::pca_project(b, VectorXd(b.mean + 2.0 * u + 3.0 * v));
    VectorXd rhs = 2.0 * state::pca_project(b, VectorXd(b.mean + u)) +
                   3.0 * state::pca_project(b, VectorXd(b.mean + v));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("downsampling a constant image is the identity on values") {
    Image img(8, 4);
    img.pixels.setConstant(0.37);
    Image out = state::downsample(img, 4, 2);
    CHECK(out.width == 4);
    CHECK(out.height == 2);
    CHECK(out.pixels.minCoeff() == doctest::Approx(0.37));
    CHECK(out.pixels.maxCoeff() == doctest::Approx(0.37));
}

TEST_CASE("a half-and-half block averages to one half") {
    Image img(2, 2);
    img.pixels << 0.0, 0.0, 1.0, 1.0;
    Image out = state::downsample(img, 1, 1);
    CHECK(out.pixels[0] == doctest::Approx(0.5));
}

TEST_CASE("two-stage downsampling equals one-stage") {
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> pix(0.0, 1.0);
    Image img(320, 240);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels[i] = pix(rng);
    Image direct = state::downsample(img, 80, 60);
    Image staged = state::downsample(state::downsample(img, 160, 120), 80, 60);
    CHECK((direct.pixels - staged.pixels).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("non-divisible downsampling targets are rejected") {
    Image img(10, 10);
    CHECK_THROWS_AS(state::downsample(img, 3, 5), ContractError);
}

TEST_CASE("a fresh window is zero-padded at the old end") {
    RewardWindowBuffer w(15);
    CHECK(w.encoded().cwiseAbs().maxCoeff() == 0.0);
    VectorXd s = w.push_and_encode(0.5);
    REQUIRE(s.size() == 15);
    for (int i = 0; i < 14; ++i) CHECK(s[i] == 0.0);
    CHECK(s[14] == 0.5);
}

TEST_CASE("the window keeps only the last n rewards in order") {
    RewardWindowBuffer w(15);
    VectorXd s;
    for (int i = 1; i <= 16; ++i) s = w.push_and_encode(i / 100.0);
    for (int i = 0; i < 15; ++i) CHECK(s[i] == doctest::Approx((i + 2) / 100.0));
}

TEST_CASE("a rising reward sequence lands at the new end of the window") {
    RewardWindowBuffer w(15);
    VectorXd s;
    for (double r : {0.0001, 0.0023, 0.3486, 0.9897}) s = w.push_and_encode(r);
    CHECK(s[11] == 0.0001);
    CHECK(s[12] == 0.0023);
    CHECK(s[13] == 0.3486);
    CHECK(s[14] == 0.9897);
    CHECK(s.head(11).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rewards outside the unit interval are rejected") {
    RewardWindowBuffer w(5);
    CHECK_THROWS_AS(w.push_and_encode(-0.01), ContractError);
    CHECK_THROWS_AS(w.push_and_encode(1.01), ContractError);
}

TEST_CASE("reset clears the window to zeros") {
    RewardWindowBuffer w(5);
    w.push_and_encode(0.9);
    w.reset();
    CHECK(w.encoded().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("state dimensions follow the spec variant") {
    CHECK(StateSpec::reward_window(15).dim() == 15);
    CHECK(StateSpec::pixels(80, 60).dim() == 4800);
    CHECK(StateSpec::pca_image(50, 32, 24).dim() == 50);
}

TEST_CASE("spec strings parse and print consistently") {
    for (const char* text : {"pixels:80x60", "pca:50", "rewards:15"}) {
        auto spec = state::parse_state_spec(text);
        CHECK(spec.str() == text);
    }
    CHECK_THROWS_AS(state::parse_state_spec("wavelets:3"), UsageError);
    CHECK_THROWS_AS(state::parse_state_spec("pixels:80"), UsageError);
}

TEST_CASE("encode dispatches per variant") {
    Image img(8, 6);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels[i] = i / 48.0;

    VectorXd px = state::encode(StateSpec::pixels(8, 6), img, nullptr, nullptr);
    CHECK(px.size() == 48);
    CHECK(px[1] == img.pixels[1]);

    auto basis = state::fit_pca(random_images(20, 48, 30), 5);
    VectorXd pc = state::encode(StateSpec::pca_image(5, 8, 6), img, nullptr, &basis);
    CHECK(pc.size() == 5);
    CHECK((pc - state::pca_project(basis, img)).cwiseAbs().maxCoeff() == 0.0);

    RewardWindowBuffer w(15);
    w.push_and_encode(0.25);
    VectorXd rw = state::encode(StateSpec::reward_window(15), img, &w, nullptr);
    CHECK(rw.size() == 15);
    CHECK(rw[14] == 0.25);
}

TEST_CASE("the reward window is blind to camera resolution") {
    Image small(8, 6), big(32, 24);
    RewardWindowBuffer w(15);
    w.push_and_encode(0.7);
    VectorXd a = state::encode(StateSpec::reward_window(15), small, &w, nullptr);
    VectorXd b = state::encode(StateSpec::reward_window(15), big, &w, nullptr);
    CHECK(a == b);
}

TEST_CASE("pca basis files round-trip bit-exactly") {
    auto b = state::fit_pca(random_images(20, 24, 31), 6);
    const std::string path = "pca_roundtrip_test.rwpc";
    state::save_pca(path, b);
    auto back = state::load_pca(path);
    CHECK(back.mean == b.mean);
    CHECK(back.components == b.components);
    CHECK(back.explained == b.explained);
    std::remove(path.c_str());
}
