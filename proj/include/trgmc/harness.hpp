#pragma once

#include <trgmc/compositor.hpp>
#include <trgmc/geometry.hpp>
#include <trgmc/image.hpp>
#include <trgmc/keypoints.hpp>
#include <trgmc/kvfile.hpp>
#include <trgmc/linkgraph.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace trgmc {

enum class Trajectory { kStatic, kPan, kPanReturn, kSimilarity, kProjective };

inline const char* trajectory_name(Trajectory t) {
    switch (t) {
        case Trajectory::kStatic: return "static";
        case Trajectory::kPan: return "pan";
        case Trajectory::kPanReturn: return "pan_return";
        case Trajectory::kSimilarity: return "similarity";
        case Trajectory::kProjective: return "projective";
    }
    return "unknown";
}

inline Trajectory trajectory_from_name(const std::string& name) {
    for (Trajectory t : {Trajectory::kStatic, Trajectory::kPan, Trajectory::kPanReturn,
                         Trajectory::kSimilarity, Trajectory::kProjective}) {
        if (name == trajectory_name(t)) return t;
    }
    throw ConfigError("unknown trajectory: " + name);
}

struct SceneSpec {
    Trajectory trajectory = Trajectory::kPanReturn;
    int frames = 20;
    int width = 320;
    int height = 240;
    double noise_sigma = 0.0;
    double outlier_frac = 0.0;
    int keypoints_per_frame = 150;
    int foreground_count = 0;      // moving rectangles
    double fg_size = 48.0;
    double fg_speed = 1.5;         // px/frame relative to the background
    int fg_keypoints = 20;         // per rectangle
    double pan_dx = 5.0;
    double pan_dy = 0.0;
    uint64_t seed = 1;
};

inline SceneSpec parse_scene_spec(const std::map<std::string, std::string>& kv) {
    SceneSpec s;
    s.trajectory = trajectory_from_name(detail::kv_string(kv, "trajectory", "pan_return"));
    s.frames = detail::kv_int(kv, "frames", s.frames);
    s.width = detail::kv_int(kv, "width", s.width);
    s.height = detail::kv_int(kv, "height", s.height);
    s.noise_sigma = detail::kv_double(kv, "noise_sigma", s.noise_sigma);
    s.outlier_frac = detail::kv_double(kv, "outlier_frac", s.outlier_frac);
    s.keypoints_per_frame = detail::kv_int(kv, "keypoints", s.keypoints_per_frame);
    s.foreground_count = detail::kv_int(kv, "foreground", s.foreground_count);
    s.fg_size = detail::kv_double(kv, "fg_size", s.fg_size);
    s.fg_speed = detail::kv_double(kv, "fg_speed", s.fg_speed);
    s.fg_keypoints = detail::kv_int(kv, "fg_keypoints", s.fg_keypoints);
    s.pan_dx = detail::kv_double(kv, "pan_dx", s.pan_dx);
    s.pan_dy = detail::kv_double(kv, "pan_dy", s.pan_dy);
    s.seed = detail::kv_u64(kv, "seed", s.seed);
    if (s.frames < 1 || s.width < 16 || s.height < 16) {
        throw ConfigError("scene spec: frames must be >= 1 and frame size >= 16");
    }
    if (s.outlier_frac < 0.0 || s.outlier_frac >= 1.0) {
        throw ConfigError("scene spec: outlier_frac must be in [0, 1)");
    }
    return s;
}

enum class LabelKind { kInlier, kOutlier, kForeground };

struct SceneKeypointLabel {
    int anchor = -1;
    LabelKind kind = LabelKind::kInlier;
};

struct SyntheticScene {
    SceneSpec spec;
    Image source;                   // the clean "world" texture
    std::vector<Homography> gt;     // frame -> world
    std::vector<Image> frames;      // rendered, foreground included
    std::vector<Image> clean_frames;
    std::vector<std::vector<uint8_t>> fg_masks;  // per frame, w*h
    std::vector<std::vector<Keypoint>> keypoints;
    std::vector<std::vector<SceneKeypointLabel>> labels;
};

namespace detail {

// Multi-octave value noise: bilinear interpolation of seeded lattice values.
inline Image procedural_texture(int width, int height, uint64_t seed) {
    Image out(width, height, 0.0f);
    double amplitude = 1.0;
    double total = 0.0;
    for (int octave = 0; octave < 4; ++octave) {
        const int cell = 32 >> octave;  // 32, 16, 8, 4
        const int gw = width / cell + 2;
        const int gh = height / cell + 2;
        std::vector<double> lattice(static_cast<size_t>(gw) * gh);
        Rng rng(splitmix64(seed ^ (0xABCDULL + octave)));
        for (double& v : lattice) v = rng.uniform();
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double gx = static_cast<double>(x) / cell;
                const double gy = static_cast<double>(y) / cell;
                const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
                const double fx = gx - x0, fy = gy - y0;
                const double v00 = lattice[static_cast<size_t>(y0) * gw + x0];
                const double v10 = lattice[static_cast<size_t>(y0) * gw + x0 + 1];
                const double v01 = lattice[static_cast<size_t>(y0 + 1) * gw + x0];
                const double v11 = lattice[static_cast<size_t>(y0 + 1) * gw + x0 + 1];
                const double top = v00 * (1 - fx) + v10 * fx;
                const double bot = v01 * (1 - fx) + v11 * fx;
                out.at(x, y) += static_cast<float>(amplitude * (top * (1 - fy) + bot * fy));
            }
        }
        total += amplitude;
        amplitude *= 0.5;
    }
    // Map into [0.35, 0.95]: bright enough to contrast with dark foreground.
    for (float& v : out.px) v = 0.35f + 0.6f * (v / static_cast<float>(total));

    // A few geometric shapes for distinctive structure.
    Rng rng(splitmix64(seed ^ 0x51AB5ULL));
    const int n_shapes = std::max(6, width * height / 12000);
    for (int s = 0; s < n_shapes; ++s) {
        const int cx = rng.index(width);
        const int cy = rng.index(height);
        const int r = 4 + rng.index(12);
        const float delta = static_cast<float>(0.3 * (rng.uniform() - 0.5));
        const bool disc = rng.next() % 2 == 0;
        for (int y = std::max(0, cy - r); y < std::min(height, cy + r); ++y) {
            for (int x = std::max(0, cx - r); x < std::min(width, cx + r); ++x) {
                if (disc && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
                float& v = out.at(x, y);
                v = std::clamp(v + delta, 0.3f, 1.0f);
            }
        }
    }
    return out;
}

inline double gaussian(Rng& rng) {
    // Box-Muller.
    double u1 = rng.uniform();
    while (u1 <= 1e-12) u1 = rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

struct ForegroundRect {
    Vec2 start;   // world position of the top-left corner at frame 0
    Vec2 vel;     // world px/frame
    double size;
    Vec2 pos(int t) const { return start + static_cast<double>(t) * vel; }
    bool contains(Vec2 world, int t) const {
        const Vec2 p = pos(t);
        return world.x >= p.x && world.x < p.x + size && world.y >= p.y &&
               world.y < p.y + size;
    }
};

}  // namespace detail

/// Generates a synthetic scene: procedural background, ground-truth
/// transforms, rendered frames (with and without foreground), per-frame
/// foreground masks and injected keypoints with inlier/outlier/foreground
/// labels. Fully deterministic in the spec and seed.
inline SyntheticScene generate_scene(const SceneSpec& spec) {
    SyntheticScene scene;
    scene.spec = spec;
    const int m = spec.frames;
    const int w = spec.width;
    const int h = spec.height;

    // Ground-truth trajectories (frame -> world, world origin fixed later).
    std::vector<Homography> gt;
    const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    detail::Rng traj_rng(detail::splitmix64(spec.seed ^ 0x7247ULL));
    const double phase = traj_rng.uniform() * 6.28318530717958647692;
    for (int t = 0; t < m; ++t) {
        switch (spec.trajectory) {
            case Trajectory::kStatic:
                gt.push_back(Homography::identity());
                break;
            case Trajectory::kPan:
                gt.push_back(Homography::translation(spec.pan_dx * t, spec.pan_dy * t));
                break;
            case Trajectory::kPanReturn: {
                const double k = std::min(t, m - 1 - t);
                gt.push_back(Homography::translation(spec.pan_dx * k, spec.pan_dy * k));
                break;
            }
            case Trajectory::kSimilarity: {
                const double f = m > 1 ? static_cast<double>(t) / (m - 1) : 0.0;
                const double theta = 0.20 * f;
                const double s = 1.0 + 0.06 * f;
                const double c = std::cos(theta) * s, sn = std::sin(theta) * s;
                // Rotation+scale about the frame center plus a translation ramp.
                const Homography rot = Homography::from_raw(
                    {c, -sn, cx - c * cx + sn * cy, sn, c, cy - sn * cx - c * cy, 0, 0, 1});
                gt.push_back(compose(Homography::translation(3.0 * t, 2.0 * t), rot));
                break;
            }
            case Trajectory::kProjective: {
                const double f = m > 1 ? static_cast<double>(t) / (m - 1) : 0.0;
                const double theta = 0.12 * std::sin(6.28318530717958647692 * f + phase);
                const double s = 1.0 + 0.04 * std::sin(3.0 * f + phase);
                const double c = std::cos(theta) * s, sn = std::sin(theta) * s;
                const double p7 = 6e-5 * std::sin(4.0 * f + phase);
                const double p8 = -5e-5 * std::cos(5.0 * f + phase);
                const Homography core = Homography::from_raw(
                    {c, -sn, cx - c * cx + sn * cy, sn, c, cy - sn * cx - c * cy, p7, p8, 1});
                gt.push_back(compose(Homography::translation(spec.pan_dx * t, spec.pan_dy * t),
                                     core));
                break;
            }
        }
    }

    // Size the world so every footprint fits, then shift the trajectories
    // into it (a pure gauge change).
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    for (const Homography& H : gt) {
        const Vec2 corners[4] = {{0, 0}, {w - 1.0, 0}, {0, h - 1.0}, {w - 1.0, h - 1.0}};
        for (const Vec2& c : corners) {
            const Vec2 p = warp_point(H, c);
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    }
    const double margin = 16.0;
    const Homography shift = Homography::translation(margin - minx, margin - miny);
    for (Homography& H : gt) H = compose(shift, H);
    const int world_w = static_cast<int>(std::ceil(maxx - minx + 2 * margin)) + 1;
    const int world_h = static_cast<int>(std::ceil(maxy - miny + 2 * margin)) + 1;
    scene.gt = gt;
    scene.source = detail::procedural_texture(world_w, world_h, spec.seed);

    // Foreground rectangles drift independently of the camera.
    std::vector<detail::ForegroundRect> rects;
    detail::Rng fg_rng(detail::splitmix64(spec.seed ^ 0xF06ULL));
    for (int i = 0; i < spec.foreground_count; ++i) {
        detail::ForegroundRect r;
        r.size = spec.fg_size;
        const Vec2 c0 = warp_point(gt[0], {0.25 * w + 0.5 * w * fg_rng.uniform(),
                                           0.25 * h + 0.5 * h * fg_rng.uniform()});
        r.start = c0 - Vec2{0.5 * r.size, 0.5 * r.size};
        const double ang = fg_rng.uniform() * 6.28318530717958647692;
        r.vel = {spec.fg_speed * std::cos(ang), spec.fg_speed * std::sin(ang)};
        rects.push_back(r);
    }
    Image fg_texture = detail::procedural_texture(
        std::max(8, static_cast<int>(spec.fg_size)), std::max(8, static_cast<int>(spec.fg_size)),
        spec.seed ^ 0xDEADULL);
    for (float& v : fg_texture.px) v = 0.02f + 0.13f * (v - 0.35f) / 0.6f;

    // Render frames.
    scene.frames.reserve(m);
    scene.clean_frames.reserve(m);
    for (int t = 0; t < m; ++t) {
        Image clean(w, h), full(w, h);
        std::vector<uint8_t> mask(static_cast<size_t>(w) * h, 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec2 world = warp_point(gt[t], {static_cast<double>(x), static_cast<double>(y)});
                if (world.x < 0 || world.x > scene.source.width - 1 || world.y < 0 ||
                    world.y > scene.source.height - 1) {
                    throw std::runtime_error("generate_scene: frame footprint escapes the source");
                }
                const float bg = static_cast<float>(scene.source.bilinear(world.x, world.y));
                clean.at(x, y) = bg;
                float v = bg;
                for (const auto& r : rects) {
                    if (r.contains(world, t)) {
                        const Vec2 local = world - r.pos(t);
                        v = static_cast<float>(fg_texture.bilinear(
                            local.x * (fg_texture.width - 1) / r.size,
                            local.y * (fg_texture.height - 1) / r.size));
                        mask[static_cast<size_t>(y) * w + x] = 1;
                        break;
                    }
                }
                full.at(x, y) = v;
            }
        }
        scene.clean_frames.push_back(std::move(clean));
        scene.frames.push_back(std::move(full));
        scene.fg_masks.push_back(std::move(mask));
    }

    // Background anchors: world points carrying a persistent descriptor.
    const int n_anchors = spec.keypoints_per_frame * 3;
    struct Anchor {
        Vec2 world;
        double scale;
        std::vector<float> desc;
    };
    std::vector<Anchor> anchors(n_anchors);
    detail::Rng anchor_rng(detail::splitmix64(spec.seed ^ 0xA2C42ULL));
    for (int i = 0; i < n_anchors; ++i) {
        anchors[i].world = {margin + (world_w - 2 * margin) * anchor_rng.uniform(),
                            margin + (world_h - 2 * margin) * anchor_rng.uniform()};
        // Mostly small scales with a heavy tail, like real detections.
        const double u = anchor_rng.uniform();
        anchors[i].scale = 2.0 + 6.0 * u * u * u * u;
        detail::Rng drng(detail::splitmix64(spec.seed ^ (0xD35CULL + i)));
        std::vector<float> d(kDescriptorSize);
        double nrm = 0;
        for (float& v : d) {
            v = static_cast<float>(detail::gaussian(drng));
            nrm += static_cast<double>(v) * v;
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(std::max(nrm, 1e-12)));
        for (float& v : d) v *= inv;
        anchors[i].desc = std::move(d);
    }
    // Foreground anchors ride on their rectangle.
    struct FgAnchor {
        int rect;
        Vec2 local;
        double scale;
        std::vector<float> desc;
    };
    std::vector<FgAnchor> fg_anchors;
    for (int rI = 0; rI < static_cast<int>(rects.size()); ++rI) {
        for (int i = 0; i < spec.fg_keypoints; ++i) {
            FgAnchor a;
            a.rect = rI;
            a.local = {rects[rI].size * fg_rng.uniform(), rects[rI].size * fg_rng.uniform()};
            const double u = fg_rng.uniform();
            a.scale = 2.0 + 4.0 * u * u * u * u;
            const int id = n_anchors + rI * spec.fg_keypoints + i;
            detail::Rng drng(detail::splitmix64(spec.seed ^ (0xD35CULL + id)));
            std::vector<float> d(kDescriptorSize);
            double nrm = 0;
            for (float& v : d) {
                v = static_cast<float>(detail::gaussian(drng));
                nrm += static_cast<double>(v) * v;
            }
            const float inv = static_cast<float>(1.0 / std::sqrt(std::max(nrm, 1e-12)));
            for (float& v : d) v *= inv;
            a.desc = std::move(d);
            fg_anchors.push_back(std::move(a));
        }
    }

    const double inset = 6.0;
    scene.keypoints.assign(m, {});
    scene.labels.assign(m, {});
    for (int t = 0; t < m; ++t) {
        const Homography inv_gt = invert(gt[t]);
        int taken = 0;
        for (int i = 0; i < n_anchors && taken < spec.keypoints_per_frame; ++i) {
            const Vec2 local = warp_point(inv_gt, anchors[i].world);
            if (local.x < inset || local.x > w - 1 - inset || local.y < inset ||
                local.y > h - 1 - inset) {
                continue;
            }
            bool occluded = false;
            for (const auto& r : rects) {
                if (r.contains(anchors[i].world, t)) {
                    occluded = true;
                    break;
                }
            }
            if (occluded) continue;
            detail::Rng krng(detail::splitmix64(spec.seed ^
                                                detail::pair_seed(0x0B5ULL, t, i)));
            Keypoint kp;
            kp.frame_id = t;
            kp.scale = anchors[i].scale;
            kp.norm_scale = 1.0;
            kp.response = 1.0;
            kp.descriptor = anchors[i].desc;
            SceneKeypointLabel label;
            label.anchor = i;
            if (spec.outlier_frac > 0.0 && krng.uniform() < spec.outlier_frac) {
                // A false observation at least 5 px from the true position.
                Vec2 p;
                do {
                    p = {inset + (w - 1 - 2 * inset) * krng.uniform(),
                         inset + (h - 1 - 2 * inset) * krng.uniform()};
                } while (norm(p - local) < 5.0);
                kp.x = p.x;
                kp.y = p.y;
                label.kind = LabelKind::kOutlier;
            } else {
                Vec2 noise{0, 0};
                if (spec.noise_sigma > 0.0) {
                    do {
                        noise = {spec.noise_sigma * detail::gaussian(krng),
                                 spec.noise_sigma * detail::gaussian(krng)};
                    } while (norm(noise) > 3.0 * spec.noise_sigma);
                }
                kp.x = std::clamp(local.x + noise.x, 0.0, w - 1.0);
                kp.y = std::clamp(local.y + noise.y, 0.0, h - 1.0);
                label.kind = LabelKind::kInlier;
            }
            scene.keypoints[t].push_back(std::move(kp));
            scene.labels[t].push_back(label);
            ++taken;
        }
        for (size_t fi = 0; fi < fg_anchors.size(); ++fi) {
            const FgAnchor& a = fg_anchors[fi];
            const Vec2 world = rects[a.rect].pos(t) + a.local;
            const Vec2 local = warp_point(inv_gt, world);
            if (local.x < inset || local.x > w - 1 - inset || local.y < inset ||
                local.y > h - 1 - inset) {
                continue;
            }
            detail::Rng krng(detail::splitmix64(
                spec.seed ^ detail::pair_seed(0xF60ULL, t, static_cast<int>(fi))));
            Vec2 noise{0, 0};
            if (spec.noise_sigma > 0.0) {
                do {
                    noise = {spec.noise_sigma * detail::gaussian(krng),
                             spec.noise_sigma * detail::gaussian(krng)};
                } while (norm(noise) > 3.0 * spec.noise_sigma);
            }
            Keypoint kp;
            kp.frame_id = t;
            kp.x = std::clamp(local.x + noise.x, 0.0, w - 1.0);
            kp.y = std::clamp(local.y + noise.y, 0.0, h - 1.0);
            kp.scale = a.scale;
            kp.norm_scale = 1.0;
            kp.response = 1.0;
            kp.descriptor = a.desc;
            scene.keypoints[t].push_back(std::move(kp));
            SceneKeypointLabel label;
            label.anchor = n_anchors + static_cast<int>(fi);
            label.kind = LabelKind::kForeground;
            scene.labels[t].push_back(label);
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Gauge-free evaluation.
// ---------------------------------------------------------------------------

/// Mean corner transfer error between the recovered and ground-truth
/// relative transforms of a frame pair. Relative transforms are taken as
/// p_i^-1 * p_j (frame j into frame i's coordinates), which cancels any
/// common gauge factor.
inline double relative_corner_error(const Homography& rec_i, const Homography& rec_j,
                                    const Homography& gt_i, const Homography& gt_j, int width,
                                    int height) {
    const Homography rel_rec = compose(invert(rec_i), rec_j);
    const Homography rel_gt = compose(invert(gt_i), gt_j);
    const Vec2 corners[4] = {
        {0, 0}, {width - 1.0, 0}, {0, height - 1.0}, {width - 1.0, height - 1.0}};
    double acc = 0.0;
    for (const Vec2& c : corners) {
        acc += norm(warp_point(rel_rec, c) - warp_point(rel_gt, c));
    }
    return acc / 4.0;
}

struct PairError {
    int i = 0;
    int j = 0;
    int gap = 0;
    double corner_error = 0.0;
    double bre_value = -1.0;  // filled only when frames are supplied
};

struct EvalResult {
    std::vector<PairError> pairs;
    double mean_corner_error = 0.0;
    double max_corner_error = 0.0;

    /// Mean corner error over pairs whose temporal gap is in [lo, hi].
    double mean_error_in_gap(int lo, int hi) const {
        double acc = 0.0;
        int n = 0;
        for (const PairError& p : pairs) {
            if (p.gap >= lo && p.gap <= hi) {
                acc += p.corner_error;
                ++n;
            }
        }
        return n > 0 ? acc / n : 0.0;
    }
};

/// Relative corner error (and BRE when frames are given) for every pair of
/// the evaluation frame set, grouped by temporal distance. Non-overlapping
/// pairs are skipped for BRE.
inline EvalResult error_vs_timegap(const std::vector<Homography>& recovered,
                                   const std::vector<Homography>& gt,
                                   const std::vector<int>& frame_set, int width, int height,
                                   const std::vector<Image>* frames = nullptr,
                                   const std::vector<std::vector<uint8_t>>* fg_masks = nullptr) {
    EvalResult out;
    for (size_t a = 0; a < frame_set.size(); ++a) {
        for (size_t b = a + 1; b < frame_set.size(); ++b) {
            const int i = frame_set[a];
            const int j = frame_set[b];
            PairError pe;
            pe.i = i;
            pe.j = j;
            pe.gap = j - i;
            pe.corner_error =
                relative_corner_error(recovered[i], recovered[j], gt[i], gt[j], width, height);
            if (frames) {
                try {
                    const std::vector<std::pair<int, int>> sizes = {{width, height},
                                                                    {width, height}};
                    const std::vector<Homography> pair_hs = {gt[i], gt[j]};
                    Canvas canvas = canvas_bounds(sizes, pair_hs);
                    std::vector<uint8_t> mask(
                        static_cast<size_t>(canvas.width) * canvas.height, 1);
                    if (fg_masks) {
                        // Background mask: neither frame's foreground.
                        for (int idx = 0; idx < 2; ++idx) {
                            const int f = idx == 0 ? i : j;
                            Image m(width, height);
                            for (size_t p = 0; p < m.px.size(); ++p) {
                                m.px[p] = (*fg_masks)[f][p] ? 1.0f : 0.0f;
                            }
                            WarpedFrame wm = warp_frame(m, gt[f], canvas);
                            for (size_t p = 0; p < mask.size(); ++p) {
                                if (wm.valid[p] && wm.image.px[p] > 0.25f) mask[p] = 0;
                            }
                        }
                    }
                    pe.bre_value = bre((*frames)[i], (*frames)[j], recovered[i], recovered[j],
                                       mask, canvas);
                } catch (const UndefinedBreError&) {
                    pe.bre_value = -1.0;
                }
            }
            out.pairs.push_back(pe);
        }
    }
    for (const PairError& p : out.pairs) {
        out.mean_corner_error += p.corner_error;
        out.max_corner_error = std::max(out.max_corner_error, p.corner_error);
    }
    if (!out.pairs.empty()) out.mean_corner_error /= out.pairs.size();
    return out;
}

/// The evaluation frame set {1, 0.25M, 0.5M, 0.75M, M} in 0-based ids.
inline std::vector<int> evaluation_frame_set(int frame_count) {
    const int m = frame_count;
    std::vector<int> raw = {0, static_cast<int>(std::lround(0.25 * (m - 1))),
                            static_cast<int>(std::lround(0.5 * (m - 1))),
                            static_cast<int>(std::lround(0.75 * (m - 1))), m - 1};
    std::vector<int> out;
    for (int v : raw) {
        if (out.empty() || out.back() != v) out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sequential chained-pairwise baseline (the drift-prone reference strategy).
// ---------------------------------------------------------------------------

/// Chains consecutive-pair robust homographies: per pair, ratio matching,
/// consensus pruning, then a least-squares fit on the survivors. Returns one
/// transform per frame into the first frame's coordinates.
inline std::vector<Homography> sequential_baseline(
    const std::vector<std::vector<Keypoint>>& kps, const MatchConfig& match_cfg,
    const PruneConfig& prune_cfg) {
    const int m = static_cast<int>(kps.size());
    std::vector<Homography> out(m);
    for (int t = 1; t < m; ++t) {
        // Fit frame t -> frame t-1.
        std::vector<MatchCandidate> cands =
            match_ratio(kps[t], kps[t - 1], match_cfg.ratio_threshold);
        PruneConfig pc = prune_cfg;
        pc.seed = detail::pair_seed(prune_cfg.seed ^ 0x5EULL, t - 1, t);
        std::vector<int> surv = prune_pair(kps[t], kps[t - 1], cands, pc);
        Homography rel;  // identity fallback when the pair fails
        if (surv.size() >= 4) {
            std::vector<std::pair<Vec2, Vec2>> pairs;
            for (int si : surv) {
                pairs.push_back({kps[t][cands[si].src_index].pos(),
                                 kps[t - 1][cands[si].dst_index].pos()});
            }
            try {
                rel = dlt_homography(pairs);
            } catch (const SingularMatrixError&) {
            }
        }
        out[t] = compose(out[t - 1], rel);
    }
    return out;
}

}  // namespace trgmc
