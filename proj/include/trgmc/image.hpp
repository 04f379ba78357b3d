#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace trgmc {

/// Grayscale raster, row-major floats in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), px(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    float at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y);
    }

    /// Bilinear sample with border clamping.
    double bilinear(double x, double y) const {
        x = std::clamp(x, 0.0, static_cast<double>(width - 1));
        y = std::clamp(y, 0.0, static_cast<double>(height - 1));
        const int x0 = static_cast<int>(x);
        const int y0 = static_cast<int>(y);
        const int x1 = std::min(x0 + 1, width - 1);
        const int y1 = std::min(y0 + 1, height - 1);
        const double fx = x - x0;
        const double fy = y - y0;
        const double top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        const double bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        return top * (1.0 - fy) + bot * fy;
    }
};

/// Separable Gaussian blur; radius is 3 sigma.
inline Image gaussian_blur(const Image& in, double sigma) {
    if (sigma <= 0.0) return in;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Image tmp(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * in.at_clamped(x + i, y);
            }
            tmp.at(x, y) = static_cast<float>(acc);
        }
    }
    Image out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * tmp.at_clamped(x, y + i);
            }
            out.at(x, y) = static_cast<float>(acc);
        }
    }
    return out;
}

/// 2x decimation with a 2x2 box average.
inline Image downsample2(const Image& in) {
    Image out(in.width / 2, in.height / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.at(x, y) = 0.25f * (in.at(2 * x, 2 * y) + in.at_clamped(2 * x + 1, 2 * y) +
                                    in.at_clamped(2 * x, 2 * y + 1) +
                                    in.at_clamped(2 * x + 1, 2 * y + 1));
        }
    }
    return out;
}

}  // namespace trgmc
