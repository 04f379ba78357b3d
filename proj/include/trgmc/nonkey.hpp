#pragma once

#include <trgmc/congeal.hpp>
#include <trgmc/geometry.hpp>
#include <trgmc/image.hpp>
#include <trgmc/linkgraph.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace trgmc {

struct NonKeyConfig {
    int t2 = 50;
    double tau2 = 1e-4;
    double tau = 1.0;   // link-error gate, px
    double r = 0.7;
    double c = 20.0;    // sigma = c * s
    double eta = 0.1;   // map floor
};

/// Per-keyframe scalar field in [eta, 1] marking likely-background regions,
/// frame-local coordinates.
struct ReliabilityMap {
    int frame_id = -1;
    Image grid;
    double eta = 0.1;

    double sample(double x, double y) const { return grid.bilinear(x, y); }
};

/// L1 alignment error between a link's two warped endpoints.
inline double link_error(const Link& link, int viewing_frame) {
    if (viewing_frame != link.frame_a && viewing_frame != link.frame_b) {
        throw std::invalid_argument("link_error: frame does not touch this link");
    }
    const Vec2 w = link.warped_of(viewing_frame);
    const Vec2 u = link.warped_of(link.other(viewing_frame));
    return std::abs(w.x - u.x) + std::abs(w.y - u.y);
}

/// Superposes unnormalized Gaussians at the frame-local start coordinates of
/// every well-aligned link (error < tau), sigma = c * s, then clamps the sum
/// into [eta, 1].
inline ReliabilityMap reliability_map(int keyframe_id, const LinkGraph& graph, int width,
                                      int height, const NonKeyConfig& cfg) {
    ReliabilityMap out;
    out.frame_id = keyframe_id;
    out.eta = cfg.eta;
    out.grid = Image(width, height, 0.0f);
    std::vector<double> acc(static_cast<size_t>(width) * height, 0.0);

    if (keyframe_id < static_cast<int>(graph.incident.size())) {
        for (int li : graph.incident[keyframe_id]) {
            const Link& l = graph.links[li];
            if (!l.alive) continue;
            if (link_error(l, keyframe_id) >= cfg.tau) continue;
            const Vec2 c = l.orig_of(keyframe_id);
            const double sigma = cfg.c * l.s;
            if (sigma <= 0.0) continue;
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
            // exp underflows to irrelevance past ~8.3 sigma.
            const double radius = 8.3 * sigma;
            const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)));
            const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + radius)));
            const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)));
            const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + radius)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - c.x, dy = y - c.y;
                    acc[static_cast<size_t>(y) * width + x] +=
                        std::exp(-(dx * dx + dy * dy) * inv2s2);
                }
            }
        }
    }
    for (size_t i = 0; i < acc.size(); ++i) {
        out.grid.px[i] = static_cast<float>(std::max(std::min(acc[i], 1.0), cfg.eta));
    }
    return out;
}

/// One destination keyframe for non-keyframe alignment.
struct KeyframeRef {
    int id = -1;
    const std::vector<Keypoint>* keypoints = nullptr;
    Homography H;
    const ReliabilityMap* map = nullptr;
};

struct NonKeyResult {
    Homography H;
    int iterations = 0;
    int links = 0;
    bool degraded = false;
};

/// Aligns one non-keyframe to its two encompassing keyframes. Keyframe
/// transforms are read-only; only frame j's homography is optimized. Links
/// are weighted by the destination keyframe's reliability map raised to r^q.
inline NonKeyResult align_nonkeyframe(int j, const std::vector<Keypoint>& j_kps,
                                      const KeyframeRef& left, const KeyframeRef& right,
                                      const InitOffsets& offsets, int frame_width,
                                      int frame_height, const MatchConfig& match_cfg,
                                      const PruneConfig& prune_cfg, const NonKeyConfig& cfg,
                                      const SolverConfig& solver_cfg) {
    if (!(left.id < j && j < right.id)) {
        throw std::invalid_argument("align_nonkeyframe: frame must lie strictly between its keyframes");
    }

    const KeyframeRef& nearer = (j - left.id <= right.id - j) ? left : right;

    // Links to both destinations; weight bases come from the reliability map
    // at the keyframe endpoint's original coordinates.
    detail::FrameObservations obs;
    for (const KeyframeRef* dst : {&left, &right}) {
        auto region = overlap_region(frame_width, frame_height, frame_width, frame_height,
                                     offsets.offset[j], offsets.offset[dst->id],
                                     match_cfg.overlap_min_frac);
        if (!region) continue;
        std::vector<MatchCandidate> cands =
            match_ratio(j_kps, *dst->keypoints, match_cfg.ratio_threshold, region);
        PruneConfig pc = prune_cfg;
        pc.seed = detail::pair_seed(prune_cfg.seed, j, dst->id);
        std::vector<int> surv = prune_pair(j_kps, *dst->keypoints, cands, pc);
        for (int si : surv) {
            const MatchCandidate& m = cands[si];
            const Keypoint& kp_dst = (*dst->keypoints)[m.dst_index];
            obs.orig_starts.push_back(j_kps[m.src_index].pos());
            obs.fixed_ends.push_back(warp_point(dst->H, kp_dst.pos()));
            obs.weights.push_back(dst->map ? dst->map->sample(kp_dst.x, kp_dst.y) : cfg.eta);
        }
    }

    NonKeyResult out;
    out.links = obs.count();

    if (obs.count() < 4) {
        // Starved frame: interpolate the keyframe translations, keep the
        // nearer keyframe's remaining parameters, and flag the result.
        const double t = static_cast<double>(j - left.id) / (right.id - left.id);
        std::array<double, 9> h = nearer.H.h;
        h[2] = (1.0 - t) * left.H.h[2] + t * right.H.h[2];
        h[5] = (1.0 - t) * left.H.h[5] + t * right.H.h[5];
        out.H = Homography::from_raw(h);
        out.degraded = true;
        return out;
    }

    // Initialize from the nearer keyframe plus the relative init translation.
    const Vec2 rel = offsets.offset[j] - offsets.offset[nearer.id];
    Homography Hj = compose(nearer.H, Homography::translation(rel.x, rel.y));

    const double gamma = solver_cfg.gamma_coeff * frame_width * frame_height;
    const std::vector<double> bases = obs.weights;
    int q = 0;
    while (q < cfg.t2) {
        for (size_t k = 0; k < bases.size(); ++k) {
            obs.weights[k] = schedule_weight(bases[k], cfg.r, q);
        }
        detail::SingleFrameStep step =
            detail::step_frame(Hj, obs, gamma, solver_cfg.reg_mask, solver_cfg.max_halvings);
        if (step.accepted) Hj = step.H;
        ++q;
        if (step.applied.norm_sq() <= cfg.tau2) break;
    }
    out.H = Hj;
    out.iterations = q;
    return out;
}

}  // namespace trgmc
