#include "sdfsplat/error.hpp"
#include "sdfsplat/optimizer.hpp"
#include "sdfsplat/train.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace sdfsplat;

namespace {

// Textbook Adam on one scalar, kept separate from the library code path.
struct ScalarAdam {
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-15;
    double m = 0.0, v = 0.0;
    int t = 0;
    double step(double x, double g) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        return x - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

StepRates uniform_rates(double lr) {
    return {lr, lr, lr, lr, lr, lr};
}

GaussianSet one_gaussian() {
    GaussianSet s;
    s.items.emplace_back();
    return s;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    std::mt19937_64 rng(1);
    GaussianSet set = sdfsplat::testing::random_scene(rng, 5);
    const GaussianSet before = set;
    AdamState state(set.size());
    std::vector<GaussianGrad> grads(set.size());
    for (int k = 0; k < 10; ++k) adam_step(set, grads, state, uniform_rates(0.1));
    for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_EQ(set.items[i].mean, before.items[i].mean);
        EXPECT_EQ(set.items[i].sh, before.items[i].sh);
        EXPECT_EQ(set.items[i].opacity_logit, before.items[i].opacity_logit);
        EXPECT_NEAR((set.items[i].rotation - before.items[i].rotation).norm(), 0.0, 1e-15);
    }
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
    GaussianSet set = one_gaussian();
    AdamState state(1);
    std::vector<GaussianGrad> grads(1);
    grads[0].mean = Vec3(3.0, -0.02, 1e-5);
    const double lr = 0.01;
    for (int k = 0; k < 50; ++k) {
        const Vec3 before = set.items[0].mean;
        adam_step(set, grads, state, uniform_rates(lr));
        const Vec3 delta = set.items[0].mean - before;
        EXPECT_NEAR(delta.x(), -lr, 1e-12);
        EXPECT_NEAR(delta.y(), lr, 1e-12);
        EXPECT_NEAR(delta.z(), -lr, 1e-9);
    }
}

TEST(Adam, MatchesScalarReferenceOnQuadratic) {
    // f(x) = 0.5 a (x - c)^2 driven through opacity_logit and mean.y.
    const double a = 3.0, c = 0.7, lr = 0.05;
    GaussianSet set = one_gaussian();
    set.items[0].opacity_logit = -1.2;
    set.items[0].mean.y() = 2.5;
    AdamState state(1);
    ScalarAdam ref_logit{lr}, ref_mean{lr};
    double x_logit = -1.2, x_mean = 2.5;
    for (int k = 0; k < 100; ++k) {
        std::vector<GaussianGrad> grads(1);
        grads[0].opacity_logit = a * (set.items[0].opacity_logit - c);
        grads[0].mean.y() = a * (set.items[0].mean.y() - c);
        adam_step(set, grads, state, uniform_rates(lr));
        x_logit = ref_logit.step(x_logit, a * (x_logit - c));
        x_mean = ref_mean.step(x_mean, a * (x_mean - c));
        ASSERT_NEAR(set.items[0].opacity_logit, x_logit, 1e-10) << "step " << k;
        ASSERT_NEAR(set.items[0].mean.y(), x_mean, 1e-10) << "step " << k;
    }
}

TEST(Adam, NonFiniteRowsAreSkipped) {
    std::mt19937_64 rng(2);
    GaussianSet set = sdfsplat::testing::random_scene(rng, 3);
    const GaussianSet before = set;
    AdamState state(3);
    std::vector<GaussianGrad> grads(3);
    for (auto& g : grads) g.mean = Vec3(1.0, 1.0, 1.0);
    grads[1].sh(4, 2) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(adam_step(set, grads, state, uniform_rates(0.1)), 1u);
    EXPECT_EQ(set.items[1].mean, before.items[1].mean);
    EXPECT_EQ(state.steps[1], 0);
    EXPECT_EQ(state.m[1].mean, Vec3::Zero());
    EXPECT_NE(set.items[0].mean, before.items[0].mean);
    EXPECT_NE(set.items[2].mean, before.items[2].mean);
}

TEST(Adam, PropertyRotationStaysUnitAndLogitsBounded) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 50.0);
    GaussianSet set = sdfsplat::testing::random_scene(rng, 8);
    AdamState state(set.size());
    for (int step = 0; step < 200; ++step) {
        std::vector<GaussianGrad> grads(set.size());
        for (auto& g : grads) {
            g.rotation = Vec4(n(rng), n(rng), n(rng), n(rng));
            g.opacity_logit = -1.0;
        }
        adam_step(set, grads, state, uniform_rates(0.5));
        for (const auto& g : set.items) {
            ASSERT_NEAR(g.rotation.norm(), 1.0, 1e-12);
            ASSERT_LE(std::abs(g.opacity_logit), kMaxOpacityLogit);
        }
    }
    EXPECT_EQ(set.items[0].opacity_logit, kMaxOpacityLogit);
}

TEST(Adam, ShapeMismatchThrows) {
    GaussianSet set = one_gaussian();
    AdamState state(2);
    std::vector<GaussianGrad> grads(1);
    EXPECT_THROW(adam_step(set, grads, state, uniform_rates(0.1)), ContractViolation);
}

TEST(AdamState, RemapKeepsRowsInOrderAndZeroesNewOnes) {
    AdamState s(4);
    for (int i = 0; i < 4; ++i) {
        s.m[static_cast<std::size_t>(i)].opacity_logit = i;
        s.steps[static_cast<std::size_t>(i)] = 10 + i;
    }
    s.remap({true, false, true, false}, 3);
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s.m[0].opacity_logit, 0.0);
    EXPECT_EQ(s.m[1].opacity_logit, 2.0);
    EXPECT_EQ(s.steps[1], 12);
    for (std::size_t i = 2; i < 5; ++i) {
        EXPECT_EQ(s.m[i].opacity_logit, 0.0);
        EXPECT_EQ(s.v[i].mean, Vec3::Zero());
        EXPECT_EQ(s.steps[i], 0);
    }
}

TEST(Schedule, DefaultStageBoundaries) {
    const StageSchedule s;
    EXPECT_EQ(s.total(), 30000);
    EXPECT_EQ(s.boundaries(), (std::array<int, 4>{7000, 9000, 15000, 30000}));
    EXPECT_EQ(s.stage_at(0), Stage::Vanilla);
    EXPECT_EQ(s.stage_at(6999), Stage::Vanilla);
    EXPECT_EQ(s.stage_at(7000), Stage::Opacity);
    EXPECT_EQ(s.stage_at(8999), Stage::Opacity);
    EXPECT_EQ(s.stage_at(9000), Stage::Regularized);
    EXPECT_EQ(s.stage_at(15000), Stage::Refinement);
    EXPECT_EQ(s.stage_at(29999), Stage::Refinement);
    EXPECT_THROW(s.stage_at(30000), ContractViolation);
    EXPECT_THROW(s.stage_at(-1), ContractViolation);
}

TEST(Schedule, LongRegularizationLeavesSevenThousandRefinement) {
    const StageSchedule s = StageSchedule::published(13000);
    EXPECT_EQ(s.refinement, 7000);
    EXPECT_EQ(s.boundaries(), (std::array<int, 4>{7000, 9000, 22000, 29000}));
    const StageSchedule d = StageSchedule::published(6000);
    EXPECT_EQ(d.refinement, 15000);
    EXPECT_EQ(d.total(), 30000);
    EXPECT_THROW(StageSchedule::published(7000), InvalidParameter);
    EXPECT_EQ(StageSchedule::with_regularized(13000).refinement, 8000);
    EXPECT_THROW(StageSchedule::with_regularized(25000), InvalidParameter);
    EXPECT_THROW((StageSchedule{-1, 0, 0, 0}.validate()), InvalidParameter);
}

TEST(Schedule, MeanRateDecaysLogLinearly) {
    const LearningRates lr;
    const double extent = 4.2;
    EXPECT_NEAR(step_rates(lr, extent, 0, 30000).mean, 1.6e-4 * extent, 1e-18);
    EXPECT_NEAR(step_rates(lr, extent, 15000, 30000).mean, 1.6e-5 * extent, 1e-17);
    EXPECT_NEAR(step_rates(lr, extent, 30000, 30000).mean, 1.6e-6 * extent, 1e-18);
    const StepRates r = step_rates(lr, extent, 123, 30000);
    EXPECT_EQ(r.rotation, 1e-3);
    EXPECT_EQ(r.log_scale, 5e-3);
    EXPECT_EQ(r.opacity_logit, 5e-2);
    EXPECT_EQ(r.sh_dc, 2.5e-3);
    EXPECT_DOUBLE_EQ(r.sh_rest, 2.5e-3 / 20.0);
}

namespace {

GaussianSet densify_fixture() {
    GaussianSet s;
    for (int i = 0; i < 4; ++i) {
        Gaussian g;
        g.mean = Vec3(i, 0.5 * i, -0.25 * i);
        g.log_scale = Vec3::Constant(std::log(0.005));
        g.opacity_logit = logit(0.6);
        s.items.push_back(g);
    }
    return s;
}

}  // namespace

TEST(Densify, QuietStatsLeaveSetUnchanged) {
    GaussianSet set = densify_fixture();
    const GaussianSet before = set;
    AdamState state(set.size());
    DensifyStats stats(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) stats.grad_sum[i] = 1e-4, stats.views[i] = 1;
    std::mt19937_64 rng(0);
    const DensifyOutcome out = densify_and_prune(set, state, stats, DensifyConfig{}, 1.0, rng);
    EXPECT_EQ(out.cloned + out.split + out.pruned, 0u);
    ASSERT_EQ(set.size(), before.size());
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(set.items[i].mean, before.items[i].mean);
}

TEST(Densify, LargeGaussianSplitsIntoTwoSmallerOnes) {
    GaussianSet set = densify_fixture();
    set.items[2].log_scale = Vec3(std::log(0.3), std::log(0.1), std::log(0.05));
    AdamState state(set.size());
    for (auto& s : state.steps) s = 7;
    DensifyStats stats(set.size());
    stats.grad_sum[2] = 9e-4;
    stats.views[2] = 3;
    std::mt19937_64 rng(4);
    const DensifyOutcome out = densify_and_prune(set, state, stats, DensifyConfig{}, 1.0, rng);
    EXPECT_EQ(out.split, 1u);
    ASSERT_EQ(set.size(), 5u);
    EXPECT_EQ(set.items[2].mean, Vec3(3.0, 1.5, -0.75));  // survivors keep their order
    for (std::size_t c = 3; c < 5; ++c) {
        const Vec3 ratio = Vec3(0.3, 0.1, 0.05).cwiseQuotient(set.items[c].scale());
        EXPECT_NEAR((ratio - Vec3::Constant(1.6)).norm(), 0.0, 1e-12);
        EXPECT_EQ(state.steps[c], 0);
        EXPECT_LT((set.items[c].mean - Vec3(2.0, 1.0, -0.5)).norm(), 2.0);
    }
    EXPECT_EQ(state.steps[2], 7);
}

TEST(Densify, SmallGaussianIsCloned) {
    GaussianSet set = densify_fixture();
    AdamState state(set.size());
    DensifyStats stats(set.size());
    stats.grad_sum[1] = 5e-4;
    stats.views[1] = 1;
    std::mt19937_64 rng(4);
    const DensifyOutcome out = densify_and_prune(set, state, stats, DensifyConfig{}, 1.0, rng);
    EXPECT_EQ(out.cloned, 1u);
    ASSERT_EQ(set.size(), 5u);
    EXPECT_EQ(set.items[4].mean, set.items[1].mean);
    EXPECT_EQ(set.items[4].log_scale, set.items[1].log_scale);
}

TEST(Densify, TransparentGaussianIsPruned) {
    GaussianSet set = densify_fixture();
    set.items[3].opacity_logit = logit(1e-4);
    AdamState state(set.size());
    state.steps[3] = 99;
    DensifyStats stats(set.size());
    std::mt19937_64 rng(4);
    const DensifyOutcome out = densify_and_prune(set, state, stats, DensifyConfig{}, 1.0, rng);
    EXPECT_EQ(out.pruned, 1u);
    ASSERT_EQ(set.size(), 3u);
    EXPECT_EQ(state.size(), 3u);
    for (auto s : state.steps) EXPECT_NE(s, 99);
}

TEST(Densify, CapKeepsStrongestCandidates) {
    GaussianSet set = densify_fixture();
    AdamState state(set.size());
    DensifyStats stats(set.size());
    for (std::size_t i = 0; i < 4; ++i) stats.grad_sum[i] = 1e-3 * (1.0 + i), stats.views[i] = 1;
    DensifyConfig cfg;
    cfg.max_gaussians = 6;
    std::mt19937_64 rng(4);
    const DensifyOutcome out = densify_and_prune(set, state, stats, cfg, 1.0, rng);
    EXPECT_EQ(out.cloned, 2u);
    ASSERT_EQ(set.size(), 6u);
    EXPECT_EQ(set.items[4].mean, set.items[2].mean);
    EXPECT_EQ(set.items[5].mean, set.items[3].mean);
}

TEST(Densify, DeterministicGivenSeed) {
    auto run = [] {
        std::mt19937_64 gen(5);
        GaussianSet set = sdfsplat::testing::random_scene(gen, 20);
        for (auto& g : set.items) g.log_scale = Vec3::Constant(std::log(0.2));
        AdamState state(set.size());
        DensifyStats stats(set.size());
        for (std::size_t i = 0; i < set.size(); i += 2) stats.grad_sum[i] = 1.0, stats.views[i] = 1;
        std::mt19937_64 rng(11);
        densify_and_prune(set, state, stats, DensifyConfig{}, 1.0, rng);
        return set;
    };
    const GaussianSet a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.items[i].mean, b.items[i].mean);
}

TEST(Densify, OpacityResetClampsAndClearsMoments) {
    GaussianSet set = densify_fixture();
    set.items[0].opacity_logit = logit(0.9);
    set.items[1].opacity_logit = logit(0.001);
    AdamState state(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        state.m[i].opacity_logit = 0.5;
        state.v[i].opacity_logit = 0.25;
        state.m[i].mean = Vec3::Constant(0.1);
    }
    reset_opacities(set, state, 0.01);
    EXPECT_NEAR(set.items[0].opacity(), 0.01, 1e-15);
    EXPECT_NEAR(set.items[1].opacity(), 0.001, 1e-15);
    for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_LE(set.items[i].opacity(), 0.01 + 1e-15);
        EXPECT_EQ(state.m[i].opacity_logit, 0.0);
        EXPECT_EQ(state.v[i].opacity_logit, 0.0);
        EXPECT_EQ(state.m[i].mean, Vec3::Constant(0.1));
    }
    AdamState wrong(1);
    EXPECT_THROW(reset_opacities(set, wrong, 0.01), ContractViolation);
}

TEST(Densify, SemiTransparentFraction) {
    GaussianSet set;
    for (double a : {0.01, 0.049, 0.5, 0.9, 0.96}) {
        Gaussian g;
        g.opacity_logit = logit(a);
        set.items.push_back(g);
    }
    EXPECT_DOUBLE_EQ(semi_transparent_fraction(set), 2.0 / 5.0);
    EXPECT_EQ(semi_transparent_fraction(GaussianSet{}), 0.0);
}

namespace {

SceneDataset small_scene(bool normals = true) {
    SceneOptions opt;
    opt.n_cameras = 9;
    opt.resolution = 32;
    opt.supersample = 1;
    SceneDataset s = generate_synthetic_scene(opt);
    if (!normals) s.normal_maps.clear();
    return s;
}

TrainConfig small_config() {
    TrainConfig c;
    c.schedule = {20, 8, 8, 4};
    c.densify.interval = 10;
    c.densify_from = 10;
    c.densify.opacity_reset_interval = 0;
    c.sh_degree_interval = 10;
    c.eval_interval = 10;
    c.init_points = 300;
    return c;
}

}  // namespace

TEST(Train, MissingNormalsIsAConfigErrorBeforeAnyIteration) {
    int calls = 0;
    EXPECT_THROW(train(small_scene(false), small_config(), [&](const IterationRecord&) { ++calls; }), ConfigError);
    EXPECT_EQ(calls, 0);
    TrainConfig c = small_config();
    c.weights.lambda_r = 0.0;
    EXPECT_NO_THROW(train(small_scene(false), c));
    c = small_config();
    c.schedule.regularized = 0;
    EXPECT_NO_THROW(train(small_scene(false), c));
}

TEST(Train, StageGatingAndTraceShape) {
    const TrainResult r = train(small_scene(), small_config());
    ASSERT_EQ(r.trace.size(), 40u);
    bool any_reg = false, any_ent = false;
    for (const auto& rec : r.trace) {
        EXPECT_EQ(rec.stage, small_config().schedule.stage_at(rec.iteration));
        if (rec.stage != Stage::Opacity) EXPECT_EQ(rec.loss.entropy, 0.0);
        else any_ent = any_ent || rec.loss.entropy > 0.0;
        if (rec.stage != Stage::Regularized) EXPECT_EQ(rec.loss.normal_reg, 0.0);
        else any_reg = any_reg || rec.loss.normal_reg > 0.0;
        EXPECT_TRUE(std::isfinite(rec.loss.total));
        if ((rec.iteration + 1) % 10 == 0) {
            ASSERT_TRUE(rec.heldout_psnr.has_value());
            EXPECT_TRUE(std::isfinite(*rec.heldout_psnr));
        } else {
            EXPECT_FALSE(rec.heldout_psnr.has_value());
        }
    }
    EXPECT_TRUE(any_reg);
    EXPECT_TRUE(any_ent);
    ASSERT_EQ(r.snapshots.size(), 5u);
    EXPECT_EQ(r.snapshots[0].label, "start");
    EXPECT_EQ(r.snapshots[2].iteration, 28);
    EXPECT_EQ(r.snapshots[4].label, "refinement");
}

TEST(Train, ZeroLambdaGivesZeroNormalRegTrace) {
    TrainConfig c = small_config();
    c.weights.lambda_r = 0.0;
    for (const auto& rec : train(small_scene(), c).trace) EXPECT_EQ(rec.loss.normal_reg, 0.0);
}

TEST(Train, CountChangesOnlyAtVanillaDensifyBoundaries) {
    TrainConfig c = small_config();
    c.densify.grad_threshold = 1e-6;
    const TrainResult r = train(small_scene(), c);
    std::size_t prev = c.init_points;
    bool changed = false;
    for (const auto& rec : r.trace) {
        const int done = rec.iteration + 1;
        if (rec.gaussians != prev) {
            changed = true;
            EXPECT_EQ(rec.stage, Stage::Vanilla);
            EXPECT_EQ(done % c.densify.interval, 0);
        }
        prev = rec.gaussians;
    }
    EXPECT_TRUE(changed);
}

TEST(Train, OpacityResetOnlyInsideTheVanillaStage) {
    TrainConfig c = small_config();
    c.densify.opacity_reset_interval = 10;
    c.densify.prune_opacity = 0.0;
    c.densify.grad_threshold = 1e3;
    // The reset lands after iteration 10 only: 20 is the last vanilla iteration.
    const TrainResult r = train(small_scene(), c);
    EXPECT_EQ(r.snapshots[1].gaussians, c.init_points);
    TrainConfig no_reset = c;
    no_reset.densify.opacity_reset_interval = 0;
    const TrainResult plain = train(small_scene(), no_reset);
    ASSERT_EQ(r.trace.size(), plain.trace.size());
    for (int i = 0; i < 10; ++i) EXPECT_EQ(r.trace[i].loss.total, plain.trace[i].loss.total) << i;
    EXPECT_NE(r.trace[10].loss.total, plain.trace[10].loss.total);
}

TEST(Train, DeterministicRunsAreBitIdentical) {
    const SceneDataset scene = small_scene();
    const TrainResult a = train(scene, small_config());
    const TrainResult b = train(scene, small_config());
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(to_json_line(a.trace[i]), to_json_line(b.trace[i]));
    ASSERT_EQ(a.gaussians.size(), b.gaussians.size());
    for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
        EXPECT_EQ(a.gaussians.items[i].mean, b.gaussians.items[i].mean);
        EXPECT_EQ(a.gaussians.items[i].sh, b.gaussians.items[i].sh);
    }
}

TEST(Train, JsonLineCarriesEveryField) {
    IterationRecord rec;
    rec.iteration = 41;
    rec.stage = Stage::Regularized;
    rec.loss = {1.5, 0.25, 0.5, 0.125, 0.0, 77};
    rec.gaussians = 1234;
    rec.heldout_psnr = std::numeric_limits<double>::infinity();
    const auto j = nlohmann::json::parse(to_json_line(rec));
    EXPECT_EQ(j["iteration"], 41);
    EXPECT_EQ(j["stage"], "regularized");
    EXPECT_EQ(j["total"], 1.5);
    EXPECT_EQ(j["normal_reg"], 0.125);
    EXPECT_EQ(j["pixels_used"], 77);
    EXPECT_EQ(j["gaussians"], 1234);
    EXPECT_EQ(j["heldout_psnr"], 100.0);
    rec.heldout_psnr.reset();
    EXPECT_FALSE(nlohmann::json::parse(to_json_line(rec)).contains("heldout_psnr"));
}

TEST(Train, InitializationLandsOnTheSurface) {
    const SceneDataset scene = small_scene();
    const GaussianSet g = initialize_gaussians(scene, 500, 0.1, 3, true);
    ASSERT_EQ(g.size(), 500u);
    for (const auto& x : g.items) {
        EXPECT_NEAR(x.mean.norm(), 1.0, 0.02);
        EXPECT_NEAR(x.opacity(), 0.1, 1e-12);
        EXPECT_GT(x.log_scale[0], std::log(1e-4));
    }
}
