#pragma once

#include <trgmc/geometry.hpp>
#include <trgmc/keypoints.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trgmc {

/// A matched keypoint pair connecting two frames (frame_a < frame_b).
/// Warped coordinates are always recomputed from the stored originals via
/// the current composite transform, never accumulated incrementally.
struct Link {
    int frame_a = -1;
    int frame_b = -1;
    Vec2 orig_a, orig_b;      // detector coordinates, frame local
    Vec2 warped_a, warped_b;  // current GMCC coordinates
    double s = 1.0;           // min of the two endpoints' normalized scales
    bool alive = true;
    int kp_a = -1, kp_b = -1;  // indices into the per-frame keypoint arrays

    int other(int viewing_frame) const {
        return viewing_frame == frame_a ? frame_b : frame_a;
    }
    Vec2 orig_of(int frame) const { return frame == frame_a ? orig_a : orig_b; }
    Vec2 warped_of(int frame) const { return frame == frame_a ? warped_a : warped_b; }
};

struct LinkGraph {
    std::vector<Link> links;
    std::vector<std::vector<int>> incident;  // frame id -> indices into links

    void rebuild_index(int frame_count) {
        incident.assign(frame_count, {});
        for (int i = 0; i < static_cast<int>(links.size()); ++i) {
            incident[links[i].frame_a].push_back(i);
            incident[links[i].frame_b].push_back(i);
        }
    }

    int incident_alive(int frame) const {
        if (frame < 0 || frame >= static_cast<int>(incident.size())) return 0;
        int n = 0;
        for (int li : incident[frame]) {
            if (links[li].alive) ++n;
        }
        return n;
    }
};

/// Per-frame 2D translation placing each frame in the global coordinate,
/// relative to frame 0.
struct InitOffsets {
    std::vector<Vec2> offset;
};

// ---------------------------------------------------------------------------
// Deterministic RNG helpers (seeded per pair, independent of pair order).
// ---------------------------------------------------------------------------

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t pair_seed(uint64_t base, int a, int b) {
    return splitmix64(base ^ splitmix64(static_cast<uint64_t>(a) * 0x100000001b3ULL ^
                                        (static_cast<uint64_t>(b) << 32)));
}

struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}
    uint64_t next() {
        state = splitmix64(state);
        return state;
    }
    // Bounded draw; modulo bias is negligible for the sizes used here.
    int index(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }
    double uniform() { return (next() >> 11) * (1.0 / 9007199254740992.0); }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Outlier pruning: seeded RANSAC over 4-point homographies plus a local
// motion-smoothness filter.
// ---------------------------------------------------------------------------

struct PruneConfig {
    double inlier_threshold = 3.0;  // px, symmetric transfer error
    double confidence = 0.995;
    int max_iterations = 2000;
    int min_iterations = 50;
    uint64_t seed = 1;
    // Smoothness gate: reject survivors deviating from the median motion of
    // their nearest surviving neighbors by more than mad_factor * MAD + slack.
    int smooth_neighbors = 8;
    double mad_factor = 3.0;
    double slack = 2.0;
};

namespace detail {

inline double symmetric_transfer(const Homography& H, const Homography& Hinv, Vec2 a,
                                 Vec2 b) {
    try {
        const Vec2 fwd = warp_point(H, a);
        const Vec2 bwd = warp_point(Hinv, b);
        return 0.5 * (norm(fwd - b) + norm(bwd - a));
    } catch (const DegenerateWarpError&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline double component_median(std::vector<double>& v) {
    const size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Returns the indices of candidates that survive robust consensus. Fewer
/// than 4 candidates, or a RANSAC consensus below 4, yields an empty set.
inline std::vector<int> prune_pair(const std::vector<Vec2>& src, const std::vector<Vec2>& dst,
                                   const PruneConfig& cfg = {}) {
    const int n = static_cast<int>(src.size());
    if (n != static_cast<int>(dst.size())) {
        throw std::invalid_argument("prune_pair: src/dst size mismatch");
    }
    if (n < 4) return {};

    detail::Rng rng(detail::splitmix64(cfg.seed ^ 0x5851f42d4c957f2dULL));

    std::vector<int> best_inliers;
    int needed = cfg.max_iterations;
    int iter = 0;
    while (iter < needed && iter < cfg.max_iterations) {
        ++iter;
        int idx[4];
        idx[0] = rng.index(n);
        for (int k = 1; k < 4; ++k) {
            bool fresh = false;
            while (!fresh) {
                idx[k] = rng.index(n);
                fresh = true;
                for (int j = 0; j < k; ++j) {
                    if (idx[j] == idx[k]) {
                        fresh = false;
                        break;
                    }
                }
            }
        }
        std::vector<std::pair<Vec2, Vec2>> sample;
        for (int k = 0; k < 4; ++k) sample.push_back({src[idx[k]], dst[idx[k]]});
        Homography H, Hinv;
        try {
            H = dlt_homography(sample);
            Hinv = invert(H);
        } catch (const SingularMatrixError&) {
            continue;
        }
        std::vector<int> inliers;
        for (int k = 0; k < n; ++k) {
            if (detail::symmetric_transfer(H, Hinv, src[k], dst[k]) <= cfg.inlier_threshold) {
                inliers.push_back(k);
            }
        }
        if (inliers.size() > best_inliers.size()) {
            best_inliers = std::move(inliers);
            const double w = static_cast<double>(best_inliers.size()) / n;
            const double denom = std::log(std::max(1e-12, 1.0 - w * w * w * w));
            if (denom < 0) {
                needed = std::max(cfg.min_iterations,
                                  std::min<int>(cfg.max_iterations,
                                                static_cast<int>(std::ceil(
                                                    std::log(1.0 - cfg.confidence) / denom))));
            }
        }
    }
    if (static_cast<int>(best_inliers.size()) < 4) return {};

    // Locally optimized refits: least squares on the consensus set, then
    // re-evaluate membership, until the set stabilizes.
    for (int round = 0; round < 3; ++round) {
        std::vector<std::pair<Vec2, Vec2>> pairs;
        for (int k : best_inliers) pairs.push_back({src[k], dst[k]});
        std::vector<int> refined;
        try {
            const Homography H = dlt_homography(pairs);
            const Homography Hinv = invert(H);
            for (int k = 0; k < n; ++k) {
                if (detail::symmetric_transfer(H, Hinv, src[k], dst[k]) <=
                    cfg.inlier_threshold) {
                    refined.push_back(k);
                }
            }
        } catch (const SingularMatrixError&) {
            break;  // keep the current consensus
        }
        if (refined.size() < 4 || refined == best_inliers) break;
        best_inliers = std::move(refined);
    }
    if (static_cast<int>(best_inliers.size()) < 4) return {};

    // Local smoothness: a survivor whose motion vector deviates from the
    // median of its nearest surviving neighbors by > mad_factor * MAD + slack
    // is discarded.
    const auto& surv = best_inliers;
    std::vector<int> out;
    for (size_t i = 0; i < surv.size(); ++i) {
        std::vector<std::pair<double, int>> by_dist;
        for (size_t j = 0; j < surv.size(); ++j) {
            if (j == i) continue;
            by_dist.push_back({norm_sq(src[surv[j]] - src[surv[i]]), surv[j]});
        }
        if (by_dist.size() < 2) {
            out.push_back(surv[i]);
            continue;
        }
        std::sort(by_dist.begin(), by_dist.end());
        const int m = std::min<int>(cfg.smooth_neighbors, static_cast<int>(by_dist.size()));
        std::vector<double> mx, my;
        for (int j = 0; j < m; ++j) {
            const int k = by_dist[j].second;
            mx.push_back(dst[k].x - src[k].x);
            my.push_back(dst[k].y - src[k].y);
        }
        std::vector<double> mx_copy = mx, my_copy = my;
        const Vec2 med{detail::component_median(mx_copy), detail::component_median(my_copy)};
        std::vector<double> devs;
        for (int j = 0; j < m; ++j) devs.push_back(norm(Vec2{mx[j], my[j]} - med));
        const double mad = detail::component_median(devs);
        const Vec2 v = dst[surv[i]] - src[surv[i]];
        if (norm(v - med) <= cfg.mad_factor * mad + cfg.slack) out.push_back(surv[i]);
    }
    return out;
}

inline std::vector<int> prune_pair(const std::vector<Keypoint>& src,
                                   const std::vector<Keypoint>& dst,
                                   const std::vector<MatchCandidate>& candidates,
                                   const PruneConfig& cfg = {}) {
    std::vector<Vec2> a, b;
    a.reserve(candidates.size());
    b.reserve(candidates.size());
    for (const MatchCandidate& m : candidates) {
        a.push_back(src[m.src_index].pos());
        b.push_back(dst[m.dst_index].pos());
    }
    return prune_pair(a, b, cfg);
}

// ---------------------------------------------------------------------------
// Translation initialization (mean surviving motion vector, cumulative).
// ---------------------------------------------------------------------------

struct MatchConfig {
    double ratio_threshold = 0.8;
    double overlap_min_frac = 0.10;
};

/// Robust pairwise translation from match candidates: consensus-pruned mean
/// of the motion vectors src -> dst, expressed as the source frame's offset
/// delta (world offset of dst = offset of src + returned value, with the
/// motion vector being src_pos - dst_pos).
inline Vec2 translation_from_matches(const std::vector<Vec2>& src_pts,
                                     const std::vector<Vec2>& dst_pts,
                                     const PruneConfig& prune_cfg,
                                     bool* had_matches = nullptr) {
    if (had_matches) *had_matches = !src_pts.empty();
    if (src_pts.empty()) return {0.0, 0.0};
    std::vector<int> surv = prune_pair(src_pts, dst_pts, prune_cfg);
    Vec2 acc{0, 0};
    if (!surv.empty()) {
        for (int k : surv) acc = acc + (src_pts[k] - dst_pts[k]);
        return (1.0 / static_cast<double>(surv.size())) * acc;
    }
    // Consensus failed; fall back to the componentwise median of all vectors.
    std::vector<double> vx, vy;
    for (size_t k = 0; k < src_pts.size(); ++k) {
        vx.push_back(src_pts[k].x - dst_pts[k].x);
        vy.push_back(src_pts[k].y - dst_pts[k].y);
    }
    return {detail::component_median(vx), detail::component_median(vy)};
}

/// Estimates per-frame 2D translations by matching consecutive frames and
/// cumulative-summing the mean surviving motion vectors. Pairs with zero
/// matches contribute (0,0) and are recorded in the diagnostics log.
inline InitOffsets estimate_translations(const std::vector<std::vector<Keypoint>>& kps,
                                         const MatchConfig& match_cfg,
                                         const PruneConfig& prune_cfg,
                                         std::vector<std::string>* diagnostics = nullptr) {
    const int m = static_cast<int>(kps.size());
    if (m < 2) throw std::invalid_argument("estimate_translations: need at least 2 frames");
    InitOffsets out;
    out.offset.assign(m, {0.0, 0.0});
    for (int t = 0; t + 1 < m; ++t) {
        std::vector<MatchCandidate> cands =
            match_ratio(kps[t], kps[t + 1], match_cfg.ratio_threshold);
        std::vector<Vec2> a, b;
        for (const MatchCandidate& c : cands) {
            a.push_back(kps[t][c.src_index].pos());
            b.push_back(kps[t + 1][c.dst_index].pos());
        }
        PruneConfig cfg = prune_cfg;
        cfg.seed = detail::pair_seed(prune_cfg.seed, t, t + 1);
        bool had = false;
        const Vec2 delta = translation_from_matches(a, b, cfg, &had);
        if (!had && diagnostics) {
            diagnostics->push_back("init: frames " + std::to_string(t) + "-" +
                                   std::to_string(t + 1) +
                                   " had no matches; translation set to (0,0)");
        }
        out.offset[t + 1] = out.offset[t] + delta;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Overlap gating.
// ---------------------------------------------------------------------------

/// Intersects two frames placed at their offsets. Returns each frame's
/// local-coordinate sub-rectangle, or nothing when the intersection is
/// smaller than min_frac of the smaller frame's area.
inline std::optional<RegionPair> overlap_region(int wi, int hi, int wj, int hj, Vec2 off_i,
                                                Vec2 off_j, double min_frac = 0.10) {
    const double x0 = std::max(off_i.x, off_j.x);
    const double y0 = std::max(off_i.y, off_j.y);
    const double x1 = std::min(off_i.x + wi, off_j.x + wj);
    const double y1 = std::min(off_i.y + hi, off_j.y + hj);
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    const double area = (x1 - x0) * (y1 - y0);
    const double frame_area = std::min(static_cast<double>(wi) * hi,
                                       static_cast<double>(wj) * hj);
    if (area < min_frac * frame_area) return std::nullopt;
    RegionPair out;
    out.src = {x0 - off_i.x, y0 - off_i.y, x1 - off_i.x, y1 - off_i.y};
    out.dst = {x0 - off_j.x, y0 - off_j.y, x1 - off_j.x, y1 - off_j.y};
    return out;
}

// ---------------------------------------------------------------------------
// Dense stack connection.
// ---------------------------------------------------------------------------

struct PairLinkCount {
    int frame_a = 0;
    int frame_b = 0;
    int links = 0;
};

/// Builds links for every unordered keyframe pair with sufficient overlap:
/// region-gated ratio matching, consensus pruning, one undirected link per
/// surviving match. Warped coordinates start at the translation placement.
inline LinkGraph connect_stack(const std::vector<int>& keyframes,
                               const std::vector<std::vector<Keypoint>>& kps,
                               const InitOffsets& offsets, int frame_width, int frame_height,
                               const MatchConfig& match_cfg, const PruneConfig& prune_cfg,
                               std::vector<PairLinkCount>* pair_counts = nullptr,
                               std::vector<std::string>* diagnostics = nullptr) {
    LinkGraph graph;
    for (size_t ai = 0; ai < keyframes.size(); ++ai) {
        for (size_t bi = ai + 1; bi < keyframes.size(); ++bi) {
            const int a = keyframes[ai];
            const int b = keyframes[bi];
            std::optional<RegionPair> region =
                overlap_region(frame_width, frame_height, frame_width, frame_height,
                               offsets.offset[a], offsets.offset[b], match_cfg.overlap_min_frac);
            int made = 0;
            if (region) {
                std::vector<MatchCandidate> cands =
                    match_ratio(kps[a], kps[b], match_cfg.ratio_threshold, region);
                PruneConfig cfg = prune_cfg;
                cfg.seed = detail::pair_seed(prune_cfg.seed, a, b);
                std::vector<int> surv = prune_pair(kps[a], kps[b], cands, cfg);
                for (int si : surv) {
                    const MatchCandidate& m = cands[si];
                    Link link;
                    link.frame_a = a;
                    link.frame_b = b;
                    link.kp_a = m.src_index;
                    link.kp_b = m.dst_index;
                    link.orig_a = kps[a][m.src_index].pos();
                    link.orig_b = kps[b][m.dst_index].pos();
                    link.warped_a = link.orig_a + offsets.offset[a];
                    link.warped_b = link.orig_b + offsets.offset[b];
                    link.s = std::min(kps[a][m.src_index].norm_scale,
                                      kps[b][m.dst_index].norm_scale);
                    graph.links.push_back(link);
                    ++made;
                }
            }
            if (pair_counts && region) pair_counts->push_back({a, b, made});
            if (made == 0 && diagnostics && region) {
                diagnostics->push_back("connect: pair " + std::to_string(a) + "-" +
                                       std::to_string(b) + " contributed no links");
            }
        }
    }
    int max_id = 0;
    for (int k : keyframes) max_id = std::max(max_id, k);
    graph.rebuild_index(max_id + 1);
    return graph;
}

// ---------------------------------------------------------------------------
// Link weight schedule (backward / backward-forward).
// ---------------------------------------------------------------------------

enum class WeightScheme { kBackward, kBackwardForward };

struct WeightParams {
    double alpha = 1.0;  // forward-link base factor
    double beta = 1.0;   // backward-link base factor
    double r = 0.7;      // rate of change across iterations

    static WeightParams for_scheme(WeightScheme scheme, double rate = 0.7) {
        WeightParams p;
        p.alpha = scheme == WeightScheme::kBackward ? 0.0 : 1.0;
        p.beta = 1.0;
        p.r = rate;
        return p;
    }
};

/// Weight of a link base raised to r^q; a zero base stays 0 for all finite q,
/// which is how the backward scheme permanently ignores forward links.
inline double schedule_weight(double base, double r, int q) {
    if (base <= 0.0) return 0.0;
    return std::pow(base, std::pow(r, static_cast<double>(q)));
}

inline double link_weight(const Link& link, int viewing_frame, const WeightParams& params,
                          int q) {
    if (viewing_frame != link.frame_a && viewing_frame != link.frame_b) {
        throw std::invalid_argument("link_weight: frame does not touch this link");
    }
    const int d = link.other(viewing_frame);
    const double factor = d < viewing_frame ? params.beta : params.alpha;
    return schedule_weight(factor * link.s, params.r, q);
}

}  // namespace trgmc
