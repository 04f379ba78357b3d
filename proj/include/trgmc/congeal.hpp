#pragma once

#include <trgmc/geometry.hpp>
#include <trgmc/linkgraph.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace trgmc {

struct UnderConstrainedStackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Solver parameters; the defaults follow the reference operating point
/// (gamma = 0.1*w*h, T1 = 300, tau1 = 5e-4, r = 0.7, translation unmasked).
struct SolverConfig {
    double gamma_coeff = 0.1;
    int t1 = 300;
    double tau1 = 5e-4;
    double r = 0.7;
    WeightScheme scheme = WeightScheme::kBackwardForward;
    std::array<double, 8> reg_mask = kDefaultRegularizerMask;
    int max_halvings = 5;
};

/// The set of keyframes under joint alignment: their ids, per-frame
/// homographies into the global coordinate, and the dense link graph.
struct FrameStack {
    std::vector<int> frames;       // keyframe ids, ascending
    std::vector<Homography> H;     // parallel to frames
    LinkGraph graph;
    WeightScheme scheme = WeightScheme::kBackwardForward;
    double weight_rate = 0.7;
    int q = 0;
    int frame_width = 0;
    int frame_height = 0;

    int index_of(int frame_id) const {
        for (size_t i = 0; i < frames.size(); ++i) {
            if (frames[i] == frame_id) return static_cast<int>(i);
        }
        return -1;
    }

    const Homography& homography_of(int frame_id) const { return H[index_of(frame_id)]; }

    /// Re-derives the warped coordinates of every link endpoint owned by
    /// frame_id from its stored original coordinates (composite-transform
    /// discipline; no incremental accumulation).
    void refresh_warped(int frame_id) {
        const Homography& Hf = H[index_of(frame_id)];
        for (int li : graph.incident[frame_id]) {
            Link& l = graph.links[li];
            if (l.frame_a == frame_id) l.warped_a = warp_point(Hf, l.orig_a);
            if (l.frame_b == frame_id) l.warped_b = warp_point(Hf, l.orig_b);
        }
    }

    void refresh_all_warped() {
        for (int id : frames) refresh_warped(id);
    }

    WeightParams weight_params() const {
        return WeightParams::for_scheme(scheme, weight_rate);
    }
};

struct FrameStepResult {
    ParamDelta applied;
    bool skipped = false;
    int halvings = 0;
    std::string skip_reason;
};

struct FrameResidualStats {
    int frame = 0;
    int links = 0;
    double mean_residual = 0.0;  // px, Euclidean per link
    double max_residual = 0.0;
    bool ever_skipped = false;
};

struct AlignmentReport {
    int iterations = 0;
    std::vector<double> objective;       // per outer iteration, after the sweep
    std::vector<double> objective_pre;   // same iteration's weights, before the sweep
    std::vector<FrameResidualStats> frame_stats;
    std::vector<PairLinkCount> pair_links;
    std::vector<std::string> diagnostics;
};

/// Assembles a FrameStack: links from dense pair matching, homographies
/// initialized to the translation placement.
inline FrameStack build_keyframe_stack(const std::vector<int>& keyframes,
                                       const std::vector<std::vector<Keypoint>>& kps,
                                       const InitOffsets& offsets, int frame_width,
                                       int frame_height, const MatchConfig& match_cfg,
                                       const PruneConfig& prune_cfg, const SolverConfig& cfg,
                                       std::vector<PairLinkCount>* pair_counts = nullptr,
                                       std::vector<std::string>* diagnostics = nullptr) {
    FrameStack stack;
    stack.frames = keyframes;
    stack.scheme = cfg.scheme;
    stack.weight_rate = cfg.r;
    stack.frame_width = frame_width;
    stack.frame_height = frame_height;
    for (int id : keyframes) {
        stack.H.push_back(
            Homography::translation(offsets.offset[id].x, offsets.offset[id].y));
    }
    stack.graph = connect_stack(keyframes, kps, offsets, frame_width, frame_height,
                                match_cfg, prune_cfg, pair_counts, diagnostics);
    return stack;
}

/// Keyframe ids at a constant step, with the last frame always included so
/// every non-keyframe has two encompassing keyframes.
inline std::vector<int> select_keyframes(int frame_count, int delta_f) {
    if (frame_count < 1) throw std::invalid_argument("select_keyframes: empty sequence");
    if (delta_f < 1) throw std::invalid_argument("select_keyframes: step must be >= 1");
    std::vector<int> out;
    for (int k = 0; k < frame_count; k += delta_f) out.push_back(k);
    if (out.back() != frame_count - 1) out.push_back(frame_count - 1);
    return out;
}

/// The congealing objective: per-frame weighted SSD of link endpoint
/// coordinates, summed over every keyframe's view of its incident links.
inline double objective(const FrameStack& stack) {
    const WeightParams params = stack.weight_params();
    double eps = 0.0;
    for (int frame : stack.frames) {
        for (int li : stack.graph.incident[frame]) {
            const Link& l = stack.graph.links[li];
            if (!l.alive) continue;
            const double w = link_weight(l, frame, params, stack.q);
            if (w <= 0.0) continue;
            const Vec2 d = l.warped_of(frame) - l.warped_of(l.other(frame));
            eps += w * norm_sq(d);
        }
    }
    return eps;
}

namespace detail {

/// One frame's view of its links: original start coordinates (frame local)
/// plus the other endpoints' current warped coordinates and weights.
struct FrameObservations {
    std::vector<Vec2> orig_starts;
    std::vector<Vec2> fixed_ends;
    std::vector<double> weights;

    int count() const { return static_cast<int>(orig_starts.size()); }
};

inline double view_error(const Homography& H, const FrameObservations& obs) {
    double acc = 0.0;
    for (int k = 0; k < obs.count(); ++k) {
        const Vec2 w = warp_point(H, obs.orig_starts[k]);
        acc += obs.weights[k] * norm_sq(w - obs.fixed_ends[k]);
    }
    return acc;
}

/// Gauss-Newton step for a single frame with step halving: solves the
/// regularized update, then halves it until the frame's weighted error does
/// not increase (up to max_halvings), rejecting the step otherwise.
/// Returns the applied delta and the updated homography.
struct SingleFrameStep {
    ParamDelta applied;
    Homography H;
    int halvings = 0;
    bool accepted = false;
};

inline SingleFrameStep step_frame(const Homography& H, const FrameObservations& obs,
                                  double gamma, const std::array<double, 8>& mask,
                                  int max_halvings) {
    const int n = obs.count();
    WeightedResiduals r;
    r.e.resize(2 * n);
    r.jac.resize(2 * n, 8);
    r.w.resize(2 * n);
    for (int k = 0; k < n; ++k) {
        const Vec2 w = warp_point(H, obs.orig_starts[k]);
        const Vec2 u = obs.fixed_ends[k];
        r.e[k] = w.x - u.x;
        r.e[k + n] = w.y - u.y;
        const JacobianRows jr = jacobian_rows(w, u);
        for (int c = 0; c < 8; ++c) {
            r.jac(k, c) = jr.x_row[c];
            r.jac(k + n, c) = jr.y_row[c];
        }
        r.w[k] = obs.weights[k];
        r.w[k + n] = obs.weights[k];
    }

    const ParamDelta dp = solve_update(r, gamma, mask);
    const double before = view_error(H, obs);

    SingleFrameStep out;
    out.H = H;
    double scale = 1.0;
    for (int attempt = 0; attempt <= max_halvings; ++attempt) {
        const ParamDelta scaled = scale * dp;
        Homography candidate;
        try {
            candidate = apply_increment(H, scaled);
            const double after = view_error(candidate, obs);
            if (after <= before) {
                out.applied = scaled;
                out.H = candidate;
                out.halvings = attempt;
                out.accepted = true;
                return out;
            }
        } catch (const SingularMatrixError&) {
            // Oversized increment; halve and retry.
        } catch (const DegenerateWarpError&) {
        }
        scale *= 0.5;
    }
    return out;  // rejected: applied stays zero, H unchanged
}

}  // namespace detail

/// Builds frame i's residual view, solves the regularized update, applies it
/// compositionally and refreshes the frame's warped link coordinates. Frames
/// with fewer than 4 positively weighted links are skipped.
inline FrameStepResult frame_step(FrameStack& stack, int frame_id, const SolverConfig& cfg) {
    FrameStepResult result;
    const WeightParams params = stack.weight_params();

    detail::FrameObservations obs;
    for (int li : stack.graph.incident[frame_id]) {
        const Link& l = stack.graph.links[li];
        if (!l.alive) continue;
        const double w = link_weight(l, frame_id, params, stack.q);
        if (w <= 0.0) continue;
        obs.orig_starts.push_back(l.orig_of(frame_id));
        obs.fixed_ends.push_back(l.warped_of(l.other(frame_id)));
        obs.weights.push_back(w);
    }
    if (obs.count() < 4) {
        result.skipped = true;
        result.skip_reason = "frame " + std::to_string(frame_id) + ": " +
                             std::to_string(obs.count()) + " effective links";
        return result;
    }

    const double gamma = cfg.gamma_coeff * stack.frame_width * stack.frame_height;
    const int idx = stack.index_of(frame_id);
    detail::SingleFrameStep step =
        detail::step_frame(stack.H[idx], obs, gamma, cfg.reg_mask, cfg.max_halvings);
    result.halvings = step.halvings;
    if (step.accepted) {
        result.applied = step.applied;
        stack.H[idx] = step.H;
        stack.refresh_warped(frame_id);
    }
    return result;
}

/// Joint keyframe alignment: Gauss-Seidel sweeps in ascending frame order
/// with the coarse-to-fine weight schedule. Stops when q reaches T1 or the
/// mean squared parameter update falls to tau1.
inline AlignmentReport congeal_keyframes(FrameStack& stack, const SolverConfig& cfg) {
    AlignmentReport report;
    stack.scheme = cfg.scheme;
    stack.weight_rate = cfg.r;
    const int n = static_cast<int>(stack.frames.size());
    if (n <= 1) return report;

    int under = 0;
    for (int id : stack.frames) {
        if (stack.graph.incident_alive(id) < 4) ++under;
    }
    if (2 * under > n) {
        throw UnderConstrainedStackError(
            "congeal: " + std::to_string(under) + " of " + std::to_string(n) +
            " keyframes have fewer than 4 links; alignment aborted");
    }

    std::map<int, bool> skipped_once;
    while (true) {
        report.objective_pre.push_back(objective(stack));
        double sum_dp = 0.0;
        for (int id : stack.frames) {
            FrameStepResult res = frame_step(stack, id, cfg);
            if (res.skipped) {
                if (!skipped_once[id]) {
                    report.diagnostics.push_back("skipped: " + res.skip_reason);
                    skipped_once[id] = true;
                }
                continue;
            }
            sum_dp += res.applied.norm_sq();
        }
        report.objective.push_back(objective(stack));
        report.iterations += 1;
        stack.q += 1;
        const double mean_dp = sum_dp / n;
        if (stack.q >= cfg.t1 || mean_dp <= cfg.tau1) break;
    }

    for (int id : stack.frames) {
        FrameResidualStats st;
        st.frame = id;
        st.ever_skipped = skipped_once.count(id) > 0;
        double acc = 0.0;
        for (int li : stack.graph.incident[id]) {
            const Link& l = stack.graph.links[li];
            if (!l.alive) continue;
            const double d = norm(l.warped_of(id) - l.warped_of(l.other(id)));
            acc += d;
            st.max_residual = std::max(st.max_residual, d);
            st.links += 1;
        }
        st.mean_residual = st.links > 0 ? acc / st.links : 0.0;
        report.frame_stats.push_back(st);
    }
    return report;
}

}  // namespace trgmc
