#pragma once

#include <Eigen/Core>

#include "rw/errors.hpp"

namespace rw {

// Grayscale image, pixels in [0,1], row-major (index = y*width + x).
struct Image {
    int width = 0;
    int height = 0;
    Eigen::VectorXd pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(Eigen::VectorXd::Zero(w * h)) {}

    double& at(int x, int y) { return pixels[y * width + x]; }
    double at(int x, int y) const { return pixels[y * width + x]; }
    int size() const { return width * height; }
};

inline void require_same_resolution(const Image& img, int w, int h, const char* what) {
    if (img.width != w || img.height != h)
        throw ContractError(std::string(what) + ": resolution mismatch, got " +
                            std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", expected " + std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace rw
