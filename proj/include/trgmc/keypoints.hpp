#pragma once

#include <trgmc/geometry.hpp>
#include <trgmc/image.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace trgmc {

/// One video frame: 0-based temporal index plus its grayscale raster.
struct Frame {
    int id = 0;
    Image image;
};

struct Keypoint {
    int frame_id = 0;
    double x = 0.0;
    double y = 0.0;
    double scale = 1.0;       // detector scale, pixels
    double norm_scale = 1.0;  // scale / max scale over the stack, in (0,1]
    double response = 0.0;
    std::vector<float> descriptor;

    Vec2 pos() const { return {x, y}; }
};

/// A tentative correspondence: indices into the src/dst keypoint arrays.
struct MatchCandidate {
    int src_index = -1;
    int dst_index = -1;
    double distance = 0.0;
    double ratio = 0.0;  // best / second-best distance
};

/// Axis-aligned rectangle, half-open: [x0, x1) x [y0, y1).
struct RectD {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(double x, double y) const {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
    double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
};

struct RegionPair {
    RectD src;
    RectD dst;
};

// ---------------------------------------------------------------------------
// Detection: Harris-style corner response over a Gaussian scale pyramid with
// a per-frame keypoint budget instead of a fixed absolute threshold.
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kHarrisK = 0.04;
constexpr double kBaseScale = 2.0;
constexpr int kDetectorBorder = 5;
constexpr double kDedupRadius = 3.0;

inline void gradients(const Image& img, Image& gx, Image& gy) {
    gx = Image(img.width, img.height);
    gy = Image(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            gx.at(x, y) = 0.5f * (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y));
            gy.at(x, y) = 0.5f * (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1));
        }
    }
}

inline Image harris_response(const Image& img) {
    Image gx, gy;
    gradients(img, gx, gy);
    Image xx(img.width, img.height), yy(img.width, img.height), xy(img.width, img.height);
    for (size_t i = 0; i < img.px.size(); ++i) {
        xx.px[i] = gx.px[i] * gx.px[i];
        yy.px[i] = gy.px[i] * gy.px[i];
        xy.px[i] = gx.px[i] * gy.px[i];
    }
    xx = gaussian_blur(xx, 1.5);
    yy = gaussian_blur(yy, 1.5);
    xy = gaussian_blur(xy, 1.5);
    Image r(img.width, img.height);
    for (size_t i = 0; i < img.px.size(); ++i) {
        const double a = xx.px[i], b = yy.px[i], c = xy.px[i];
        const double det = a * b - c * c;
        const double tr = a + b;
        r.px[i] = static_cast<float>(det - kHarrisK * tr * tr);
    }
    return r;
}

}  // namespace detail

/// Detects corner keypoints over a Gaussian scale pyramid. Returns at most
/// max_count keypoints, strongest response first. Constant images yield an
/// empty list; low-texture inputs still return whatever local maxima exist.
inline std::vector<Keypoint> detect(const Frame& frame, int max_count) {
    if (max_count < 1) throw std::invalid_argument("detect: max_count must be >= 1");
    if (frame.image.width < 16 || frame.image.height < 16) {
        throw std::invalid_argument("detect: frame must be at least 16x16");
    }

    struct RawDetection {
        double x, y, scale, response;
        int level;
    };
    std::vector<RawDetection> raws;

    Image level_img = gaussian_blur(frame.image, 1.0);
    double level_factor = 1.0;
    for (int level = 0; level < 4; ++level) {
        if (level > 0) {
            // Keep levels at least 32 px wide after decimation.
            if (level_img.width < 64 || level_img.height < 64) break;
            level_img = downsample2(gaussian_blur(level_img, 1.0));
            level_factor *= 2.0;
        }
        Image r = detail::harris_response(level_img);
        const int b = detail::kDetectorBorder;
        for (int y = b; y < r.height - b; ++y) {
            for (int x = b; x < r.width - b; ++x) {
                const float v = r.at(x, y);
                if (v <= 1e-10f) continue;
                // 3x3 non-max suppression; plateau ties go to the first
                // pixel in scan order so symmetric patterns still detect.
                bool is_max = true;
                for (int dy = -1; dy <= 1 && is_max; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const float nv = r.at(x + dx, y + dy);
                        if (nv > v || (nv == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                            is_max = false;
                            break;
                        }
                    }
                }
                if (!is_max) continue;
                raws.push_back({(x + 0.5) * level_factor - 0.5,
                                (y + 0.5) * level_factor - 0.5,
                                detail::kBaseScale * level_factor, v, level});
            }
        }
    }

    // Fine levels claim their neighborhoods first; a coarser detection within
    // the coarser scale's radius is the same feature re-observed.
    std::sort(raws.begin(), raws.end(), [](const RawDetection& a, const RawDetection& b) {
        if (a.level != b.level) return a.level < b.level;
        if (a.response != b.response) return a.response > b.response;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    std::vector<RawDetection> kept;
    for (const RawDetection& d : raws) {
        bool dup = false;
        for (const RawDetection& k : kept) {
            const double radius = std::max(detail::kDedupRadius, std::max(k.scale, d.scale));
            const double dx = k.x - d.x, dy = k.y - d.y;
            if (dx * dx + dy * dy < radius * radius) {
                dup = true;
                break;
            }
        }
        if (!dup) kept.push_back(d);
    }

    std::sort(kept.begin(), kept.end(), [](const RawDetection& a, const RawDetection& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.level != b.level) return a.level < b.level;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (static_cast<int>(kept.size()) > max_count) kept.resize(max_count);

    std::vector<Keypoint> out;
    out.reserve(kept.size());
    for (const RawDetection& d : kept) {
        Keypoint kp;
        kp.frame_id = frame.id;
        kp.x = d.x;
        kp.y = d.y;
        kp.scale = d.scale;
        kp.norm_scale = 1.0;
        kp.response = d.response;
        out.push_back(std::move(kp));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Description: 64-dim gradient-patch descriptor (4x4 cells, per-cell sums of
// dx, |dx|, dy, |dy| over a 16x16 sample grid at keypoint scale), mean
// subtracted and L2 normalized.
// ---------------------------------------------------------------------------

inline constexpr int kDescriptorSize = 64;

inline std::vector<float> describe(const Keypoint& kp, const Frame& frame) {
    const Image& img = frame.image;
    const double step = 0.75 * kp.scale;
    std::vector<float> desc(kDescriptorSize, 0.0f);

    for (int sy = 0; sy < 16; ++sy) {
        for (int sx = 0; sx < 16; ++sx) {
            const double px = kp.x + (sx - 7.5) * step;
            const double py = kp.y + (sy - 7.5) * step;
            const double gx = img.bilinear(px + step, py) - img.bilinear(px - step, py);
            const double gy = img.bilinear(px, py + step) - img.bilinear(px, py - step);
            const int cell = (sy / 4) * 4 + (sx / 4);
            desc[cell * 4 + 0] += static_cast<float>(gx);
            desc[cell * 4 + 1] += static_cast<float>(std::abs(gx));
            desc[cell * 4 + 2] += static_cast<float>(gy);
            desc[cell * 4 + 3] += static_cast<float>(std::abs(gy));
        }
    }

    // Center each of the four gradient channels across the 16 cells; the
    // absolute-value channels otherwise share a systematic positive offset
    // that correlates descriptors of unrelated patches.
    for (int c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (int cell = 0; cell < 16; ++cell) mean += desc[cell * 4 + c];
        mean /= 16.0;
        for (int cell = 0; cell < 16; ++cell) desc[cell * 4 + c] -= static_cast<float>(mean);
    }
    double norm_sq = 0.0;
    for (float v : desc) norm_sq += static_cast<double>(v) * v;
    if (norm_sq > 1e-24) {
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (float& v : desc) v *= inv;
    } else {
        std::fill(desc.begin(), desc.end(), 0.0f);
    }
    return desc;
}

inline std::vector<Keypoint> detect_and_describe(const Frame& frame, int max_count) {
    std::vector<Keypoint> kps = detect(frame, max_count);
    for (Keypoint& kp : kps) kp.descriptor = describe(kp, frame);
    return kps;
}

// ---------------------------------------------------------------------------
// Scale normalization across the whole stack (max becomes exactly 1).
// ---------------------------------------------------------------------------

inline void normalize_scales(std::span<std::vector<Keypoint>> per_frame) {
    double max_scale = 0.0;
    size_t total = 0;
    for (const auto& kps : per_frame) {
        for (const Keypoint& kp : kps) {
            max_scale = std::max(max_scale, kp.scale);
            ++total;
        }
    }
    if (total == 0 || max_scale <= 0.0) {
        throw std::invalid_argument("normalize_scales: no keypoints with positive scale");
    }
    for (auto& kps : per_frame) {
        for (Keypoint& kp : kps) kp.norm_scale = kp.scale / max_scale;
    }
}

// ---------------------------------------------------------------------------
// Nearest-neighbor ratio matching, mutual-best filtered.
// ---------------------------------------------------------------------------

namespace detail {

inline double descriptor_dist_sq(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

struct NearestTwo {
    int best = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();

    double ratio() const {
        if (d2 <= 1e-24) return d1 <= 1e-24 ? 1.0 : 1.0;  // fully ambiguous
        if (!std::isfinite(d2)) return 0.0;               // unique candidate
        return std::sqrt(d1) / std::sqrt(d2);
    }
};

}  // namespace detail

/// Matches src keypoints against dst with the nearest-neighbor ratio test
/// and mutual-best filtering. When a region pair is given, only keypoints
/// inside their respective rectangles participate. Output is symmetric:
/// match_ratio(A, B) and match_ratio(B, A) give the same unordered pairs.
inline std::vector<MatchCandidate> match_ratio(
    const std::vector<Keypoint>& src, const std::vector<Keypoint>& dst,
    double ratio_threshold, const std::optional<RegionPair>& region = std::nullopt) {
    if (ratio_threshold <= 0.0 || ratio_threshold >= 1.0) {
        throw std::invalid_argument("match_ratio: ratio threshold must be in (0, 1)");
    }

    std::vector<int> src_ids, dst_ids;
    for (int i = 0; i < static_cast<int>(src.size()); ++i) {
        if (!region || region->src.contains(src[i].x, src[i].y)) src_ids.push_back(i);
    }
    for (int j = 0; j < static_cast<int>(dst.size()); ++j) {
        if (!region || region->dst.contains(dst[j].x, dst[j].y)) dst_ids.push_back(j);
    }
    if (src_ids.empty() || dst_ids.empty()) return {};

    std::vector<detail::NearestTwo> fwd(src_ids.size());
    std::vector<detail::NearestTwo> bwd(dst_ids.size());
    for (size_t a = 0; a < src_ids.size(); ++a) {
        const auto& da = src[src_ids[a]].descriptor;
        for (size_t b = 0; b < dst_ids.size(); ++b) {
            const double d = detail::descriptor_dist_sq(da, dst[dst_ids[b]].descriptor);
            if (d < fwd[a].d1) {
                fwd[a].d2 = fwd[a].d1;
                fwd[a].d1 = d;
                fwd[a].best = static_cast<int>(b);
            } else if (d < fwd[a].d2) {
                fwd[a].d2 = d;
            }
            if (d < bwd[b].d1) {
                bwd[b].d2 = bwd[b].d1;
                bwd[b].d1 = d;
                bwd[b].best = static_cast<int>(a);
            } else if (d < bwd[b].d2) {
                bwd[b].d2 = d;
            }
        }
    }

    std::vector<MatchCandidate> out;
    for (size_t a = 0; a < src_ids.size(); ++a) {
        const int b = fwd[a].best;
        if (b < 0 || bwd[b].best != static_cast<int>(a)) continue;
        const double ra = fwd[a].ratio();
        const double rb = bwd[b].ratio();
        const double ratio = std::max(ra, rb);
        if (ratio >= ratio_threshold) continue;
        MatchCandidate m;
        m.src_index = src_ids[a];
        m.dst_index = dst_ids[b];
        m.distance = std::sqrt(fwd[a].d1);
        m.ratio = ratio;
        out.push_back(m);
    }
    return out;
}

}  // namespace trgmc
