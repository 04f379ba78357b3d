#pragma once

#include <trgmc/geometry.hpp>
#include <trgmc/image.hpp>
#include <trgmc/nonkey.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trgmc {

struct CanvasTooLargeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UndefinedBreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Canvas geometry plus accumulation rasters. Raster index (0,0) corresponds
/// to global coordinate (ox, oy).
struct Canvas {
    double ox = 0.0;
    double oy = 0.0;
    int width = 0;
    int height = 0;
    Image image;     // accumulation raster
    Image coverage;  // per-pixel weight/alpha
};

struct GaugeResult {
    bool fallback_anchor = false;  // singular mean; anchored to invert(p_1)
};

/// Applies (mean(p_first, p_last))^-1 to every transform, the elementwise
/// matrix mean taken literally. A singular mean falls back to anchoring on
/// the first frame.
inline GaugeResult normalize_gauge(std::vector<Homography>& hs) {
    if (hs.empty()) throw std::invalid_argument("normalize_gauge: empty transform list");
    GaugeResult result;
    std::array<double, 9> mean;
    for (int i = 0; i < 9; ++i) mean[i] = 0.5 * (hs.front().h[i] + hs.back().h[i]);
    Homography correction;
    try {
        correction = invert(Homography::from_raw(mean));
    } catch (const SingularMatrixError&) {
        correction = invert(hs.front());
        result.fallback_anchor = true;
    }
    for (Homography& h : hs) h = compose(correction, h);
    return result;
}

/// Axis-aligned bounding box of all warped frame corners, expanded to integer
/// pixels. Throws CanvasTooLargeError (naming the offending frame) when the
/// raster would exceed max_pixels.
inline Canvas canvas_bounds(const std::vector<std::pair<int, int>>& frame_sizes,
                            const std::vector<Homography>& hs,
                            int64_t max_pixels = int64_t{64} * 1024 * 1024) {
    if (frame_sizes.size() != hs.size() || hs.empty()) {
        throw std::invalid_argument("canvas_bounds: need one homography per frame");
    }
    double minx = 0, miny = 0, maxx = 0, maxy = 0;
    bool first = true;
    for (size_t i = 0; i < hs.size(); ++i) {
        const double w = frame_sizes[i].first - 1.0;
        const double h = frame_sizes[i].second - 1.0;
        const Vec2 corners[4] = {{0, 0}, {w, 0}, {0, h}, {w, h}};
        for (const Vec2& c : corners) {
            const Vec2 p = warp_point(hs[i], c);
            if (first) {
                minx = maxx = p.x;
                miny = maxy = p.y;
                first = false;
            } else {
                minx = std::min(minx, p.x);
                maxx = std::max(maxx, p.x);
                miny = std::min(miny, p.y);
                maxy = std::max(maxy, p.y);
            }
        }
        const int64_t cur_w = static_cast<int64_t>(std::ceil(maxx)) -
                              static_cast<int64_t>(std::floor(minx)) + 1;
        const int64_t cur_h = static_cast<int64_t>(std::ceil(maxy)) -
                              static_cast<int64_t>(std::floor(miny)) + 1;
        if (cur_w * cur_h > max_pixels) {
            throw CanvasTooLargeError("canvas exceeds " + std::to_string(max_pixels) +
                                      " pixels after including frame " + std::to_string(i));
        }
    }
    Canvas canvas;
    canvas.ox = std::floor(minx);
    canvas.oy = std::floor(miny);
    canvas.width = static_cast<int>(std::ceil(maxx) - canvas.ox) + 1;
    canvas.height = static_cast<int>(std::ceil(maxy) - canvas.oy) + 1;
    canvas.image = Image(canvas.width, canvas.height, 0.0f);
    canvas.coverage = Image(canvas.width, canvas.height, 0.0f);
    return canvas;
}

struct WarpedFrame {
    Image image;
    std::vector<uint8_t> valid;
};

/// Inverse warping onto the canvas grid: each canvas pixel is mapped through
/// H^-1 and bilinearly sampled; pixels outside the source are invalid.
inline WarpedFrame warp_frame(const Image& frame, const Homography& H, const Canvas& canvas) {
    WarpedFrame out;
    out.image = Image(canvas.width, canvas.height, 0.0f);
    out.valid.assign(static_cast<size_t>(canvas.width) * canvas.height, 0);
    const Homography Hinv = invert(H);
    for (int cy = 0; cy < canvas.height; ++cy) {
        for (int cx = 0; cx < canvas.width; ++cx) {
            const Vec2 world{cx + canvas.ox, cy + canvas.oy};
            Vec2 src;
            try {
                src = warp_point(Hinv, world);
            } catch (const DegenerateWarpError&) {
                continue;
            }
            if (src.x < 0.0 || src.x > frame.width - 1.0 || src.y < 0.0 ||
                src.y > frame.height - 1.0) {
                continue;
            }
            out.image.at(cx, cy) = static_cast<float>(frame.bilinear(src.x, src.y));
            out.valid[static_cast<size_t>(cy) * canvas.width + cx] = 1;
        }
    }
    return out;
}

/// Per-pixel reliability-weighted average of the warped keyframes; pixels
/// covered by no keyframe stay invalid.
struct BackgroundPlate {
    Canvas canvas;  // geometry only; image holds the plate
    Image image;
    Image weight_sum;
    std::vector<uint8_t> valid;
};

inline BackgroundPlate reconstruct_background(const std::vector<Image>& keyframe_images,
                                              const std::vector<Homography>& hs,
                                              const std::vector<ReliabilityMap>& maps,
                                              const Canvas& canvas) {
    if (keyframe_images.size() != hs.size() || hs.size() != maps.size()) {
        throw std::invalid_argument("reconstruct_background: size mismatch");
    }
    BackgroundPlate plate;
    plate.canvas = canvas;
    plate.image = Image(canvas.width, canvas.height, 0.0f);
    plate.weight_sum = Image(canvas.width, canvas.height, 0.0f);
    plate.valid.assign(static_cast<size_t>(canvas.width) * canvas.height, 0);

    std::vector<double> num(plate.valid.size(), 0.0);
    std::vector<double> den(plate.valid.size(), 0.0);
    for (size_t i = 0; i < keyframe_images.size(); ++i) {
        const WarpedFrame wf = warp_frame(keyframe_images[i], hs[i], canvas);
        const WarpedFrame wr = warp_frame(maps[i].grid, hs[i], canvas);
        for (size_t p = 0; p < plate.valid.size(); ++p) {
            if (!wf.valid[p] || !wr.valid[p]) continue;
            const double r = wr.image.px[p];
            num[p] += r * wf.image.px[p];
            den[p] += r;
        }
    }
    for (size_t p = 0; p < plate.valid.size(); ++p) {
        plate.weight_sum.px[p] = static_cast<float>(den[p]);
        if (den[p] > 0.0) {
            plate.image.px[p] = static_cast<float>(num[p] / den[p]);
            plate.valid[p] = 1;
        }
    }
    return plate;
}

struct Mosaic {
    Canvas canvas;
    Image image;
    std::vector<uint8_t> valid;
};

enum class RenderMode { kOverlay, kOverBackground };

/// Composites frames in temporal order, later frames over earlier. In
/// over-background mode the canvas starts from the background plate. The
/// optional emit callback receives the canvas after each frame.
inline Mosaic render_panorama(
    const std::vector<Image>& frames, const std::vector<Homography>& hs, RenderMode mode,
    const Canvas& canvas, const BackgroundPlate* plate = nullptr,
    const std::function<void(int, const Image&, const std::vector<uint8_t>&)>& emit = nullptr) {
    if (frames.size() != hs.size()) {
        throw std::invalid_argument("render_panorama: need one homography per frame");
    }
    if (mode == RenderMode::kOverBackground && plate == nullptr) {
        throw std::invalid_argument("render_panorama: over-background mode needs a plate");
    }
    Mosaic out;
    out.canvas = canvas;
    out.image = Image(canvas.width, canvas.height, 0.0f);
    out.valid.assign(static_cast<size_t>(canvas.width) * canvas.height, 0);
    if (mode == RenderMode::kOverBackground) {
        for (size_t p = 0; p < out.valid.size(); ++p) {
            if (plate->valid[p]) {
                out.image.px[p] = plate->image.px[p];
                out.valid[p] = 1;
            }
        }
    }
    for (size_t i = 0; i < frames.size(); ++i) {
        const WarpedFrame wf = warp_frame(frames[i], hs[i], canvas);
        for (size_t p = 0; p < out.valid.size(); ++p) {
            if (wf.valid[p]) {
                out.image.px[p] = wf.image.px[p];
                out.valid[p] = 1;
            }
        }
        if (emit) emit(static_cast<int>(i), out.image, out.valid);
    }
    return out;
}

/// Thresholds |plate - warped frame| on mutually valid pixels, optionally
/// followed by a 3x3 majority filter. Returned mask lives on the canvas grid.
inline std::vector<uint8_t> segment_foreground(const Image& frame, const Homography& H,
                                               const BackgroundPlate& plate, double tau_fg,
                                               bool majority_filter = true) {
    const Canvas& canvas = plate.canvas;
    const WarpedFrame wf = warp_frame(frame, H, canvas);
    std::vector<uint8_t> mask(plate.valid.size(), 0);
    for (size_t p = 0; p < mask.size(); ++p) {
        if (!plate.valid[p] || !wf.valid[p]) continue;
        if (std::abs(plate.image.px[p] - wf.image.px[p]) > tau_fg) mask[p] = 1;
    }
    if (!majority_filter) return mask;
    std::vector<uint8_t> filtered(mask.size(), 0);
    for (int y = 0; y < canvas.height; ++y) {
        for (int x = 0; x < canvas.width; ++x) {
            int set = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= canvas.width || yy < 0 || yy >= canvas.height) continue;
                    set += mask[static_cast<size_t>(yy) * canvas.width + xx];
                }
            }
            if (set >= 5) filtered[static_cast<size_t>(y) * canvas.width + x] = 1;
        }
    }
    return filtered;
}

/// Background region error between two warped frames over the intersection
/// of their footprints, restricted to the given canvas-grid background mask.
inline double bre(const Image& frame_i, const Image& frame_j, const Homography& Hi,
                  const Homography& Hj, const std::vector<uint8_t>& background_mask,
                  const Canvas& canvas) {
    if (background_mask.size() != static_cast<size_t>(canvas.width) * canvas.height) {
        throw std::invalid_argument("bre: mask must match the canvas grid");
    }
    const WarpedFrame wi = warp_frame(frame_i, Hi, canvas);
    const WarpedFrame wj = warp_frame(frame_j, Hj, canvas);
    double diff_sum = 0.0;
    double mask_sum = 0.0;
    for (size_t p = 0; p < background_mask.size(); ++p) {
        if (!wi.valid[p] || !wj.valid[p] || !background_mask[p]) continue;
        diff_sum += std::abs(static_cast<double>(wi.image.px[p]) - wj.image.px[p]);
        mask_sum += 1.0;
    }
    if (mask_sum == 0.0) {
        throw UndefinedBreError("bre: empty intersection or empty background mask");
    }
    return diff_sum / mask_sum;
}

}  // namespace trgmc
