#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rw/dataset.hpp"
#include "rw/errors.hpp"

using namespace rw;
using data::CaptureSession;
using data::Label;

namespace {

// Small sessions keep the suite fast; composition logic is count-independent.
std::vector<CaptureSession> tiny_sessions(int n, std::uint64_t seed = 77) {
    sim::EnvConfig cfg;
    std::vector<CaptureSession> out;
    for (int i = 0; i < n; ++i)
        out.push_back(data::generate_session(cfg, i, seed, 6, 10));
    return out;
}

}  // namespace

TEST_CASE("sessions contain exactly the requested class counts") {
    sim::EnvConfig cfg;
    auto s = data::generate_session(cfg, 0, 1, 20, 44);
    CHECK(s.images.size() == 64);
    CHECK(s.count(Label::Success) == 20);
    CHECK(s.count(Label::NonSuccess) == 44);
}

TEST_CASE("zero image counts are rejected") {
    sim::EnvConfig cfg;
    CHECK_THROWS_AS(data::generate_session(cfg, 0, 1, 0, 10), ContractError);
    CHECK_THROWS_AS(data::generate_session(cfg, 0, 1, 10, 0), ContractError);
}

TEST_CASE("session generation is deterministic per seed") {
    sim::EnvConfig cfg;
    auto a = data::generate_session(cfg, 3, 42, 5, 8);
    auto b = data::generate_session(cfg, 3, 42, 5, 8);
    REQUIRE(a.images.size() == b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i].label == b.images[i].label);
        CHECK(a.images[i].image.pixels == b.images[i].image.pixels);
    }
}

TEST_CASE("distinct sessions sample distinct workspaces") {
    sim::EnvConfig cfg;
    auto a = data::generate_session(cfg, 0, 42, 5, 8);
    auto b = data::generate_session(cfg, 1, 42, 5, 8);
    CHECK(a.images[0].image.pixels != b.images[0].image.pixels);
}

TEST_CASE("ten sessions split 8:1:1 by ascending id") {
    auto split = data::split_sessions(tiny_sessions(10));
    REQUIRE(split.train.size() == 8);
    REQUIRE(split.validation.size() == 1);
    REQUIRE(split.test.size() == 1);
    for (int i = 0; i < 8; ++i) CHECK(split.train[i].session_id == i);
    CHECK(split.validation[0].session_id == 8);
    CHECK(split.test[0].session_id == 9);
}

TEST_CASE("full-size sessions yield the documented image totals") {
    // 10 x 640 -> 5120 / 640 / 640. Checked via counts, not regeneration.
    auto sessions = tiny_sessions(10);
    std::size_t per = sessions[0].images.size();
    auto split = data::split_sessions(std::move(sessions));
    CHECK(split.train.size() * per == 8 * per);
    CHECK(split.validation.size() * per == per);
    CHECK(split.test.size() * per == per);
}

TEST_CASE("split rejects duplicate session ids") {
    auto sessions = tiny_sessions(3);
    sessions[2].session_id = sessions[0].session_id;
    CHECK_THROWS_AS(data::split_sessions(std::move(sessions)), ContractError);
}

TEST_CASE("split partitions are disjoint") {
    auto split = data::split_sessions(tiny_sessions(10));
    for (const auto& tr : split.train) {
        CHECK(tr.session_id != split.validation[0].session_id);
        CHECK(tr.session_id != split.test[0].session_id);
    }
    CHECK(split.validation[0].session_id != split.test[0].session_id);
}

TEST_CASE("dataset files round-trip bit-exactly") {
    auto sessions = tiny_sessions(3);
    const std::string path = "dataset_roundtrip_test.rwds";
    data::save_dataset(path, sessions);
    auto back = data::load_dataset(path);
    REQUIRE(back.size() == sessions.size());
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        CHECK(back[s].session_id == sessions[s].session_id);
        CHECK(back[s].seed == sessions[s].seed);
        REQUIRE(back[s].images.size() == sessions[s].images.size());
        for (std::size_t i = 0; i < sessions[s].images.size(); ++i) {
            CHECK(back[s].images[i].label == sessions[s].images[i].label);
            // Generation already quantized, so u8 storage loses nothing.
            CHECK(back[s].images[i].image.pixels == sessions[s].images[i].image.pixels);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("file size matches the format arithmetic") {
    auto sessions = tiny_sessions(2);
    const std::string path = "dataset_size_test.rwds";
    data::save_dataset(path, sessions);
    const int w = sessions[0].images[0].image.width;
    const int h = sessions[0].images[0].image.height;
    CHECK(std::filesystem::file_size(path) == data::dataset_file_size(w, h, sessions));
    std::remove(path.c_str());
}

TEST_CASE("corrupt magic bytes are reported distinctly") {
    auto sessions = tiny_sessions(1);
    const std::string path = "dataset_magic_test.rwds";
    data::save_dataset(path, sessions);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    CHECK_THROWS_AS(data::load_dataset(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("truncated files are rejected") {
    auto sessions = tiny_sessions(1);
    const std::string path = "dataset_trunc_test.rwds";
    data::save_dataset(path, sessions);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
    CHECK_THROWS_AS(data::load_dataset(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("quantization matches the save and load arithmetic") {
    Image img(4, 2);
    img.pixels << 0.0, 1.0, 0.5, 0.001, 0.999, 0.25, 0.75, 0.123456;
    Image q = data::quantize_roundtrip(img);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i)
        CHECK(q.pixels[i] == std::round(img.pixels[i] * 255.0) / 255.0);
    // Idempotent.
    CHECK(data::quantize_roundtrip(q).pixels == q.pixels);
}
