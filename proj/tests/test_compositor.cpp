#include <gtest/gtest.h>

#include <trgmc/compositor.hpp>
#include <trgmc/congeal.hpp>
#include <trgmc/harness.hpp>

#include <cmath>
#include <vector>

using namespace trgmc;

namespace {

Image noise_image(int w, int h, uint64_t seed) {
    Image img(w, h);
    detail::Rng rng(seed);
    for (float& v : img.px) v = static_cast<float>(0.2 + 0.6 * rng.uniform());
    return img;
}

double mean_abs_diff_valid(const Image& a, const Image& b, const std::vector<uint8_t>& valid) {
    double acc = 0.0;
    int n = 0;
    for (size_t i = 0; i < valid.size(); ++i) {
        if (!valid[i]) continue;
        acc += std::abs(static_cast<double>(a.px[i]) - b.px[i]);
        ++n;
    }
    return n > 0 ? acc / n : 0.0;
}

}  // namespace

TEST(NormalizeGauge, IdentityEndsLeaveEverythingAlone) {
    std::vector<Homography> hs = {Homography::identity(), Homography::translation(3, 4),
                                  Homography::identity()};
    normalize_gauge(hs);
    EXPECT_EQ(hs[0].h, Homography::identity().h);
    EXPECT_NEAR(hs[1].h[2], 3.0, 1e-12);
    EXPECT_NEAR(hs[1].h[5], 4.0, 1e-12);
}

TEST(NormalizeGauge, EqualEndsBecomeIdentity) {
    const Homography T = Homography::translation(12, -7);
    std::vector<Homography> hs = {T, Homography::translation(5, 5), T};
    normalize_gauge(hs);
    for (int i = 0; i < 9; ++i) {
        EXPECT_NEAR(hs[0].h[i], Homography::identity().h[i], 1e-12);
        EXPECT_NEAR(hs[2].h[i], Homography::identity().h[i], 1e-12);
    }
    EXPECT_NEAR(hs[1].h[2], 5.0 - 12.0, 1e-12);
    EXPECT_NEAR(hs[1].h[5], 5.0 + 7.0, 1e-12);
}

TEST(NormalizeGauge, OppositeTranslationsAverageToIdentity) {
    std::vector<Homography> hs = {Homography::translation(10, 0),
                                  Homography::translation(2, 2),
                                  Homography::translation(-10, 0)};
    normalize_gauge(hs);
    EXPECT_NEAR(hs[0].h[2], 10.0, 1e-12);
    EXPECT_NEAR(hs[2].h[2], -10.0, 1e-12);
    EXPECT_NEAR(hs[1].h[2], 2.0, 1e-12);
}

TEST(NormalizeGauge, SecondPassIsNoOpAfterSymmetricEnds) {
    const Homography T = Homography::translation(12, -7);
    std::vector<Homography> hs = {T, Homography::translation(5, 5), T};
    normalize_gauge(hs);
    std::vector<Homography> again = hs;
    normalize_gauge(again);
    for (size_t i = 0; i < hs.size(); ++i) {
        for (int k = 0; k < 9; ++k) EXPECT_NEAR(again[i].h[k], hs[i].h[k], 1e-9);
    }
}

TEST(NormalizeGauge, SingularMeanFallsBackToFirstFrameAnchor) {
    // Ends rotated 180 degrees apart: the elementwise mean collapses.
    Homography r180 = Homography::from_raw({-1, 0, 0, 0, -1, 0, 0, 0, 1});
    std::vector<Homography> hs = {Homography::translation(4, 4), Homography::identity(), r180};
    hs[2] = compose(r180, Homography::translation(4, 4));
    GaugeResult res = normalize_gauge(hs);
    EXPECT_TRUE(res.fallback_anchor);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(hs[0].h[i], Homography::identity().h[i], 1e-12);
}

TEST(CanvasBounds, SingleIdentityFrame) {
    Canvas c = canvas_bounds({{320, 240}}, {Homography::identity()});
    EXPECT_EQ(c.width, 320);
    EXPECT_EQ(c.height, 240);
    EXPECT_DOUBLE_EQ(c.ox, 0.0);
    EXPECT_DOUBLE_EQ(c.oy, 0.0);
}

TEST(CanvasBounds, TwoOffsetFrames) {
    Canvas c = canvas_bounds({{320, 240}, {320, 240}},
                             {Homography::identity(), Homography::translation(100, 0)});
    EXPECT_EQ(c.width, 420);
    EXPECT_EQ(c.height, 240);
}

TEST(CanvasBounds, ProjectiveMatchesDenseBorderOracle) {
    Homography H = Homography::from_raw({1.05, 0.08, 14, -0.04, 0.97, -6, 2e-4, -1e-4, 1});
    Canvas c = canvas_bounds({{320, 240}}, {H});
    // Densely sample the frame border through the warp.
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    auto visit = [&](double x, double y) {
        const Vec2 p = warp_point(H, {x, y});
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    };
    for (int i = 0; i < 2000; ++i) {
        const double fx = 319.0 * i / 1999.0;
        const double fy = 239.0 * i / 1999.0;
        visit(fx, 0);
        visit(fx, 239);
        visit(0, fy);
        visit(319, fy);
    }
    EXPECT_LE(std::abs(c.ox - std::floor(minx)), 1.0);
    EXPECT_LE(std::abs(c.oy - std::floor(miny)), 1.0);
    EXPECT_LE(std::abs((c.ox + c.width - 1) - std::ceil(maxx)), 1.0);
    EXPECT_LE(std::abs((c.oy + c.height - 1) - std::ceil(maxy)), 1.0);
}

TEST(CanvasBounds, CapNamesTheOffendingFrame) {
    try {
        canvas_bounds({{320, 240}, {320, 240}},
                      {Homography::identity(), Homography::translation(5000, 5000)},
                      400 * 300);
        FAIL() << "expected CanvasTooLargeError";
    } catch (const CanvasTooLargeError& e) {
        EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
    }
}

TEST(WarpFrame, IdentityCopiesExactly) {
    Image img = noise_image(64, 48, 81);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    WarpedFrame wf = warp_frame(img, Homography::identity(), c);
    for (size_t i = 0; i < img.px.size(); ++i) {
        EXPECT_EQ(wf.image.px[i], img.px[i]);
        EXPECT_EQ(wf.valid[i], 1);
    }
}

TEST(WarpFrame, IntegerTranslationIsBitExact) {
    Image img = noise_image(64, 48, 82);
    Homography H = Homography::translation(17, -5);
    Canvas c = canvas_bounds({{64, 48}}, {H});
    WarpedFrame wf = warp_frame(img, H, c);
    int checked = 0;
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 64; ++x) {
            const int cx = static_cast<int>(x + 17 - c.ox);
            const int cy = static_cast<int>(y - 5 - c.oy);
            ASSERT_TRUE(wf.image.in_bounds(cx, cy));
            EXPECT_EQ(wf.image.at(cx, cy), img.at(x, y));
            ++checked;
        }
    }
    EXPECT_EQ(checked, 64 * 48);
}

TEST(WarpFrame, RoundTripResamplingStaysSmall) {
    Image img = gaussian_blur(noise_image(96, 72, 83), 1.0);
    Homography H = Homography::from_raw({1.02, 0.05, 9, -0.03, 0.98, -4, 1e-4, -6e-5, 1});
    Canvas ca = canvas_bounds({{96, 72}}, {H});
    WarpedFrame a = warp_frame(img, H, ca);

    // Map the canvas raster back onto the original frame grid.
    Canvas cb = canvas_bounds({{96, 72}}, {Homography::identity()});
    Homography back = invert(compose(Homography::translation(-ca.ox, -ca.oy), H));
    WarpedFrame b = warp_frame(a.image, back, cb);

    double acc = 0.0;
    int n = 0;
    for (int y = 5; y < 67; ++y) {
        for (int x = 5; x < 91; ++x) {
            if (!b.valid[static_cast<size_t>(y) * cb.width + x]) continue;
            acc += std::abs(static_cast<double>(b.image.at(x, y)) - img.at(x, y));
            ++n;
        }
    }
    ASSERT_GT(n, 1000);
    EXPECT_LT(acc / n, 0.01);
}

TEST(RenderPanorama, SingleFrameEqualsWarpedFrame) {
    Image img = noise_image(64, 48, 84);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    Mosaic m = render_panorama({img}, {Homography::identity()}, RenderMode::kOverlay, c);
    EXPECT_EQ(mean_abs_diff_valid(m.image, img, m.valid), 0.0);
}

TEST(RenderPanorama, StaticTripleEqualsInput) {
    Image img = noise_image(64, 48, 85);
    std::vector<Image> frames = {img, img, img};
    std::vector<Homography> hs(3, Homography::identity());
    Canvas c = canvas_bounds({{64, 48}, {64, 48}, {64, 48}}, hs);
    int emitted = 0;
    Mosaic m = render_panorama(frames, hs, RenderMode::kOverlay, c, nullptr,
                               [&](int, const Image&, const std::vector<uint8_t>&) { ++emitted; });
    EXPECT_EQ(emitted, 3);
    EXPECT_LE(mean_abs_diff_valid(m.image, img, m.valid), 0.01);
}

TEST(RenderPanorama, SyntheticPanMatchesSource) {
    SceneSpec spec;
    spec.trajectory = Trajectory::kPan;
    spec.frames = 8;
    spec.pan_dx = 4.7;
    spec.seed = 86;
    SyntheticScene scene = generate_scene(spec);
    std::vector<std::pair<int, int>> sizes(8, {320, 240});
    Canvas c = canvas_bounds(sizes, scene.gt);
    Mosaic m = render_panorama(scene.frames, scene.gt, RenderMode::kOverlay, c);
    // The mosaic must reproduce the source texture it was cut from.
    double acc = 0.0;
    int n = 0;
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            if (!m.valid[static_cast<size_t>(y) * c.width + x]) continue;
            acc += std::abs(m.image.at(x, y) -
                            static_cast<float>(scene.source.bilinear(x + c.ox, y + c.oy)));
            ++n;
        }
    }
    ASSERT_GT(n, 320 * 240);
    EXPECT_LT(acc / n, 0.02);
}

namespace {

struct FgFixture {
    SyntheticScene scene;
    std::vector<int> keys;
    std::vector<Image> key_images;
    std::vector<Homography> key_hs;
    std::vector<ReliabilityMap> maps;
    Canvas canvas;
    BackgroundPlate plate;
};

FgFixture make_fg_fixture() {
    FgFixture f;
    SceneSpec spec;
    spec.trajectory = Trajectory::kPan;
    spec.frames = 8;
    spec.noise_sigma = 0.3;
    spec.keypoints_per_frame = 140;
    spec.foreground_count = 1;
    spec.fg_keypoints = 15;
    spec.fg_speed = 8.0;  // crosses its own footprint within the clip
    spec.fg_size = 40.0;
    spec.seed = 87;
    f.scene = generate_scene(spec);
    f.keys = {0, 1, 2, 3, 4, 5, 6, 7};

    // Links via the normal matching path, but with ground-truth transforms;
    // the reliability maps expose genuinely misaligned (foreground) links.
    std::vector<std::vector<Keypoint>> kps = f.scene.keypoints;
    normalize_scales(kps);
    PruneConfig pc;
    InitOffsets offsets = estimate_translations(kps, {}, pc);
    SolverConfig cfg;
    FrameStack stack = build_keyframe_stack(f.keys, kps, offsets, 320, 240, {}, pc, cfg);
    for (int i = 0; i < 8; ++i) stack.H[i] = f.scene.gt[i];
    stack.refresh_all_warped();

    NonKeyConfig nk;
    for (int i = 0; i < 8; ++i) {
        f.maps.push_back(reliability_map(i, stack.graph, 320, 240, nk));
        f.key_images.push_back(f.scene.frames[i]);
        f.key_hs.push_back(f.scene.gt[i]);
    }
    std::vector<std::pair<int, int>> sizes(8, {320, 240});
    f.canvas = canvas_bounds(sizes, f.key_hs);
    f.plate = reconstruct_background(f.key_images, f.key_hs, f.maps, f.canvas);
    return f;
}

}  // namespace

TEST(ReconstructBackground, SingleFrameEqualsWarp) {
    Image img = noise_image(64, 48, 88);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    ReliabilityMap map;
    map.frame_id = 0;
    map.grid = Image(64, 48, 1.0f);
    BackgroundPlate plate =
        reconstruct_background({img}, {Homography::identity()}, {map}, c);
    for (size_t i = 0; i < img.px.size(); ++i) {
        ASSERT_EQ(plate.valid[i], 1);
        EXPECT_EQ(plate.image.px[i], img.px[i]);
    }
}

TEST(ReconstructBackground, TwoIdenticalFramesAverageToEither) {
    Image img = noise_image(64, 48, 89);
    Canvas c = canvas_bounds({{64, 48}, {64, 48}},
                             {Homography::identity(), Homography::identity()});
    ReliabilityMap map;
    map.frame_id = 0;
    map.grid = Image(64, 48, 0.7f);
    BackgroundPlate plate = reconstruct_background(
        {img, img}, {Homography::identity(), Homography::identity()}, {map, map}, c);
    for (size_t i = 0; i < img.px.size(); ++i) {
        EXPECT_NEAR(plate.image.px[i], img.px[i], 1e-6);
    }
}

TEST(ReconstructBackground, PlateBeatsEveryFrameAndAttenuatesForeground) {
    FgFixture f = make_fg_fixture();

    // Clean background on the canvas grid is the source itself.
    auto clean_at = [&](int x, int y) {
        return static_cast<float>(f.scene.source.bilinear(x + f.canvas.ox, y + f.canvas.oy));
    };
    double plate_err = 0.0;
    int plate_n = 0;
    for (int y = 0; y < f.canvas.height; ++y) {
        for (int x = 0; x < f.canvas.width; ++x) {
            const size_t p = static_cast<size_t>(y) * f.canvas.width + x;
            if (!f.plate.valid[p]) continue;
            plate_err += std::abs(f.plate.image.px[p] - clean_at(x, y));
            ++plate_n;
        }
    }
    plate_err /= plate_n;

    double fg_attenuation_acc = 0.0;
    int fg_attenuation_n = 0;
    for (int i = 0; i < 8; ++i) {
        const WarpedFrame wf = warp_frame(f.scene.frames[i], f.scene.gt[i], f.canvas);
        Image fg_mask_img(320, 240);
        for (size_t p = 0; p < fg_mask_img.px.size(); ++p) {
            fg_mask_img.px[p] = f.scene.fg_masks[i][p] ? 1.0f : 0.0f;
        }
        const WarpedFrame wm = warp_frame(fg_mask_img, f.scene.gt[i], f.canvas);
        double frame_err = 0.0;
        int frame_n = 0;
        for (int y = 0; y < f.canvas.height; ++y) {
            for (int x = 0; x < f.canvas.width; ++x) {
                const size_t p = static_cast<size_t>(y) * f.canvas.width + x;
                if (!wf.valid[p]) continue;
                const float clean = clean_at(x, y);
                frame_err += std::abs(wf.image.px[p] - clean);
                ++frame_n;
                if (wm.valid[p] && wm.image.px[p] > 0.9f && f.plate.valid[p]) {
                    const double single = std::abs(wf.image.px[p] - clean);
                    if (single > 0.2) {
                        fg_attenuation_acc += std::abs(f.plate.image.px[p] - clean) / single;
                        ++fg_attenuation_n;
                    }
                }
            }
        }
        frame_err /= frame_n;
        EXPECT_LT(plate_err, frame_err) << "frame " << i;
    }
    ASSERT_GT(fg_attenuation_n, 500);
    EXPECT_LT(fg_attenuation_acc / fg_attenuation_n, 0.5);
}

TEST(ReconstructBackground, WeightedMeanBounds) {
    FgFixture f = make_fg_fixture();
    std::vector<WarpedFrame> warped;
    for (int i = 0; i < 8; ++i) {
        warped.push_back(warp_frame(f.key_images[i], f.key_hs[i], f.canvas));
    }
    for (size_t p = 0; p < f.plate.valid.size(); p += 7) {
        if (!f.plate.valid[p]) continue;
        float lo = 2.0f, hi = -1.0f;
        for (const WarpedFrame& wf : warped) {
            if (!wf.valid[p]) continue;
            lo = std::min(lo, wf.image.px[p]);
            hi = std::max(hi, wf.image.px[p]);
        }
        EXPECT_GE(f.plate.image.px[p], lo - 1e-5f);
        EXPECT_LE(f.plate.image.px[p], hi + 1e-5f);
    }
}

TEST(SegmentForeground, FrameEqualToPlateGivesEmptyMask) {
    Image img = noise_image(64, 48, 90);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    ReliabilityMap map;
    map.grid = Image(64, 48, 1.0f);
    BackgroundPlate plate =
        reconstruct_background({img}, {Homography::identity()}, {map}, c);
    std::vector<uint8_t> mask =
        segment_foreground(img, Homography::identity(), plate, 0.1);
    for (uint8_t v : mask) EXPECT_EQ(v, 0);
}

TEST(SegmentForeground, ThresholdAboveDynamicRangeGivesEmptyMask) {
    FgFixture f = make_fg_fixture();
    std::vector<uint8_t> mask =
        segment_foreground(f.scene.frames[2], f.scene.gt[2], f.plate, 1.0);
    for (uint8_t v : mask) EXPECT_EQ(v, 0);
}

TEST(SegmentForeground, MovingSquareIoU) {
    FgFixture f = make_fg_fixture();
    for (int i : {1, 3}) {
        std::vector<uint8_t> mask =
            segment_foreground(f.scene.frames[i], f.scene.gt[i], f.plate, 0.1);
        Image fg_mask_img(320, 240);
        for (size_t p = 0; p < fg_mask_img.px.size(); ++p) {
            fg_mask_img.px[p] = f.scene.fg_masks[i][p] ? 1.0f : 0.0f;
        }
        const WarpedFrame wm = warp_frame(fg_mask_img, f.scene.gt[i], f.canvas);
        int inter = 0, uni = 0;
        for (size_t p = 0; p < mask.size(); ++p) {
            const bool gt_fg = wm.valid[p] && wm.image.px[p] > 0.5f;
            const bool got = mask[p] != 0;
            inter += (gt_fg && got) ? 1 : 0;
            uni += (gt_fg || got) ? 1 : 0;
        }
        ASSERT_GT(uni, 0);
        EXPECT_GE(static_cast<double>(inter) / uni, 0.8) << "frame " << i;
    }
}

TEST(SegmentForeground, RaisingThresholdNeverGrowsPreFilterMask) {
    FgFixture f = make_fg_fixture();
    std::vector<uint8_t> lo =
        segment_foreground(f.scene.frames[2], f.scene.gt[2], f.plate, 0.1, false);
    std::vector<uint8_t> hi =
        segment_foreground(f.scene.frames[2], f.scene.gt[2], f.plate, 0.25, false);
    for (size_t p = 0; p < lo.size(); ++p) {
        EXPECT_LE(hi[p], lo[p]);
    }
}

TEST(Bre, SameFrameIsZero) {
    Image img = noise_image(64, 48, 91);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    std::vector<uint8_t> mask(static_cast<size_t>(c.width) * c.height, 1);
    EXPECT_DOUBLE_EQ(bre(img, img, Homography::identity(), Homography::identity(), mask, c),
                     0.0);
}

TEST(Bre, ConstantFramesGiveExactDifference) {
    Image a(64, 48, 0.3f);
    Image b(64, 48, 0.5f);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    std::vector<uint8_t> mask(static_cast<size_t>(c.width) * c.height, 1);
    const double v = bre(a, b, Homography::identity(), Homography::identity(), mask, c);
    EXPECT_NEAR(v, 0.2, 1e-7);
}

TEST(Bre, SymmetricBitExact) {
    SceneSpec spec;
    spec.trajectory = Trajectory::kPan;
    spec.frames = 4;
    spec.seed = 92;
    SyntheticScene scene = generate_scene(spec);
    std::vector<std::pair<int, int>> sizes = {{320, 240}, {320, 240}};
    std::vector<Homography> hs = {scene.gt[0], scene.gt[3]};
    Canvas c = canvas_bounds(sizes, hs);
    std::vector<uint8_t> mask(static_cast<size_t>(c.width) * c.height, 1);
    const double ij = bre(scene.frames[0], scene.frames[3], hs[0], hs[1], mask, c);
    const double ji = bre(scene.frames[3], scene.frames[0], hs[1], hs[0], mask, c);
    EXPECT_EQ(ij, ji);
    EXPECT_GE(ij, 0.0);
    EXPECT_LE(ij, 1.0);
    // Ground-truth transforms leave only resampling noise.
    EXPECT_LT(ij, 0.02);
}

TEST(Bre, EmptyMaskThrows) {
    Image img = noise_image(64, 48, 93);
    Canvas c = canvas_bounds({{64, 48}}, {Homography::identity()});
    std::vector<uint8_t> mask(static_cast<size_t>(c.width) * c.height, 0);
    EXPECT_THROW(
        bre(img, img, Homography::identity(), Homography::identity(), mask, c),
        UndefinedBreError);
}
