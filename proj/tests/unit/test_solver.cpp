#include "rawburst/merge/demosaic.hpp"
#include "rawburst/solver/solver.hpp"
#include "rawburst/synth/synth.hpp"
#include "rawburst/util/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rawburst;

namespace {

Burst make_burst(const std::vector<Image>& frames, const std::vector<double>& dts, int scale = 1,
                 BayerLayout layout = BayerLayout::RGGB) {
    Burst b;
    b.meta.frame_count = static_cast<int>(frames.size());
    b.meta.exposures = dts;
    b.meta.scale = scale;
    b.meta.reference = 0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        RawFrame f;
        f.data = frames[k];
        f.exposure = dts[k];
        f.sensor.pattern = BayerPattern(layout);
        b.frames.push_back(f);
    }
    return b;
}

std::vector<AffineWarpField> identity_fields(const Burst& b) {
    return std::vector<AffineWarpField>(b.meta.frame_count, AffineWarpField::identity(b.hr_height(), b.hr_width()));
}

// Noise-free burst of a smooth scene with small sub-pixel shifts and matching warps.
struct SmallScene {
    Image gt;
    Burst burst;
    std::vector<AffineWarpField> fields;
};

SmallScene small_scene(int hr, int scale, const std::vector<double>& dts, std::uint64_t seed) {
    SmallScene s;
    s.gt = Image(hr, hr, 3);
    for (int y = 0; y < hr; ++y)
        for (int x = 0; x < hr; ++x)
            for (int c = 0; c < 3; ++c)
                s.gt(y, x, c) = 0.3 + 0.1 * c + 0.15 * std::sin(0.3 * x + 0.2 * y + c) * std::cos(0.17 * y - 0.1 * x);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    std::vector<Image> frames;
    for (std::size_t k = 0; k < dts.size(); ++k) {
        const Affine a = k == 0 ? Affine::identity() : Affine::translation(u(rng), u(rng));
        s.fields.emplace_back(hr, hr, 200, a);
        const FrameOperator op(hr / scale, hr / scale, scale, dts[k], BayerPattern(), s.fields.back());
        frames.push_back(op.apply(s.gt));
    }
    s.burst = make_burst(frames, dts, scale);
    return s;
}

} // namespace

TEST_CASE("TV prox: trivial cases") {
    std::mt19937_64 rng(1);
    const Image z = oracle::random_image(7, 9, 3, rng);
    CHECK(prox_tv_l1(z, 0.0) == z);
    const Image flat(6, 5, 2, 0.4);
    const Image out = prox_tv_l1(flat, 0.3);
    for (double v : out.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(prox_tv_l1(z, -1.0), ValidationError);
}

TEST_CASE("TV prox: 1-D signals against the exact prox") {
    SUBCASE("step") {
        // Height 1 step over 12 samples; plateaus move toward each other by gamma / 6.
        std::vector<double> z(12, 0.0);
        for (int i = 6; i < 12; ++i) z[i] = 1.0;
        Image img(1, 12);
        for (int i = 0; i < 12; ++i) img(0, i) = z[i];
        const double gamma = 0.06;
        const Image x = prox_tv_l1(img, gamma);
        const std::vector<double> ref = oracle::tv_prox_1d(z, gamma);
        for (int i = 0; i < 12; ++i) {
            CHECK(std::abs(x(0, i) - ref[i]) <= 1e-3);
        }
        CHECK(ref[0] == doctest::Approx(gamma / 6));
        CHECK(ref[11] == doctest::Approx(1.0 - gamma / 6));
    }
    SUBCASE("piecewise signals, both orientations") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 4 + trial % 13;
            std::vector<double> z(n);
            double level = u(rng);
            for (int i = 0; i < n; ++i) {
                if (u(rng) < 0.3) level = u(rng);
                z[i] = level + 0.02 * (u(rng) - 0.5);
            }
            const double gamma = 0.01 + 0.03 * u(rng);
            const std::vector<double> ref = oracle::tv_prox_1d(z, gamma);
            Image row(1, n), col(n, 1);
            for (int i = 0; i < n; ++i) row(0, i) = col(i, 0) = z[i];
            const Image xr = prox_tv_l1(row, gamma), xc = prox_tv_l1(col, gamma);
            for (int i = 0; i < n; ++i) {
                CHECK(std::abs(xr(0, i) - ref[i]) <= 1e-9);
                CHECK(std::abs(xc(i, 0) - ref[i]) <= 1e-9);
            }
        }
    }
}

TEST_CASE("TV prox lowers the prox objective on 2-D images") {
    std::mt19937_64 rng(4);
    const Image z = oracle::random_image(16, 16, 3, rng, 0.0, 1.0);
    const double gamma = 0.05;
    const Image x = prox_tv_l1(z, gamma);
    const Image d = x - z;
    CHECK(0.5 * squared_norm(d) + gamma * tv_aniso(x) < gamma * tv_aniso(z));
    CHECK(tv_aniso(x) < tv_aniso(z));
    CHECK(mean_value(x) == doctest::Approx(mean_value(z)).epsilon(1e-12));
}

TEST_CASE("TV prox: 2-D images against a long dual projected-gradient run") {
    std::mt19937_64 rng(14);
    for (double gamma : {0.02, 0.1}) {
        const Image z = oracle::random_image(12, 10, 1, rng, 0.0, 1.0);
        const Image ref = oracle::tv_prox_2d(z, gamma);
        const Image x = prox_tv_l1(z, gamma);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x.values()[i] - ref.values()[i]));
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("priors and confidence functions") {
    std::mt19937_64 rng(2);
    const Image z = oracle::random_image(5, 5, 3, rng);
    CHECK(IdentityPrior().apply(z, 0.7) == z);
    CHECK(TvL1Prior().apply(z, 0.0) == z);
    CHECK(make_prior("none")->name() == "none");
    CHECK(make_prior("tvl1")->name() == "tvl1");
    CHECK_THROWS_AS(make_prior("bm3d"), ValidationError);

    const Image y = oracle::random_image(6, 6, 1, rng, 0.0, 1.0);
    const Image g_same = ResidualConfidence(0.05)(y, y);
    for (double v : g_same.values()) CHECK(v == 1.0);
    const Image g = ResidualConfidence(0.05)(y, oracle::random_image(6, 6, 1, rng, 0.0, 2.0));
    for (double v : g.values()) CHECK((v >= 0.0 && v <= 1.0));
    // r = 0.05 is one sigma.
    const Image g1 = ResidualConfidence(0.05)(Image(1, 1, 1, 0.55), Image(1, 1, 1, 0.5));
    CHECK(g1(0, 0) == doctest::Approx(std::exp(-0.5)));
    const Image unit = UnitConfidence()(y, y);
    for (double v : unit.values()) CHECK(v == 1.0);
    CHECK_THROWS_AS(ResidualConfidence(0.0), ValidationError);
}

TEST_CASE("fusion weights") {
    SUBCASE("single frame") {
        const Burst b = make_burst({Image(4, 4, 1, 0.5)}, {1.0});
        const std::vector<Image> w = fusion_weights(b, frame_operators(b, identity_fields(b)));
        for (double v : w[0].values()) CHECK(v == 1.0);
    }
    SUBCASE("exposure shares and saturation fallback") {
        Image bright(4, 4, 1, 0.9);
        bright(1, 2) = 1.0;
        Image dark(4, 4, 1, 0.3);
        dark(1, 2) = 0.99;
        const Burst b = make_burst({dark, bright}, {1.0, 3.0});
        const std::vector<Image> w = fusion_weights(b, frame_operators(b, identity_fields(b)));
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                if (y == 1 && x == 2) {
                    CHECK(w[0](y, x) == 0.5);
                    CHECK(w[1](y, x) == 0.5);
                } else {
                    CHECK(w[0](y, x) == 0.25);
                    CHECK(w[1](y, x) == 0.75);
                }
            }
    }
    SUBCASE("partial saturation gives the unsaturated frame everything") {
        const Burst b = make_burst({Image(2, 2, 1, 0.4), Image(2, 2, 1, 1.0), Image(2, 2, 1, 0.1)}, {1.0, 2.0, 0.25});
        const std::vector<Image> w = fusion_weights(b, frame_operators(b, identity_fields(b)));
        CHECK(w[0](0, 0) == doctest::Approx(0.8));
        CHECK(w[1](0, 0) == 0.0);
        CHECK(w[2](0, 0) == doctest::Approx(0.2));
        CHECK(w[0](0, 0) + w[1](0, 0) + w[2](0, 0) == 1.0);
    }
    SUBCASE("confidence and validity multiply the shares") {
        const Burst b = make_burst({Image(4, 4, 1, 0.4), Image(4, 4, 1, 0.4)}, {1.0, 1.0});
        std::vector<AffineWarpField> f = identity_fields(b);
        f[1].set_all(Affine::translation(2.5, 0.0));
        const std::vector<FrameOperator> ops = frame_operators(b, f);
        const std::vector<Image> w = fusion_weights(b, ops, {Image(4, 4, 1, 0.5), Image(4, 4, 1, 1.0)});
        CHECK(w[0](0, 0) == 0.25);
        CHECK(w[1](0, 0) == 0.5);
        CHECK(w[1](0, 3) == 0.0);
    }
}

TEST_CASE("init_z") {
    SUBCASE("constant gray") {
        const Burst b = make_burst({Image(6, 6, 1, 0.3)}, {1.0});
        const Image z = init_z(b, identity_fields(b));
        CHECK(z.channels() == 3);
        for (double v : z.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("scale doubles the size") {
        const Burst b = make_burst({Image(6, 8, 1, 0.3), Image(6, 8, 1, 0.6)}, {1.0, 2.0}, 2);
        const Image z = init_z(b, identity_fields(b));
        CHECK(z.height() == 12);
        CHECK(z.width() == 16);
        for (double v : z.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
    }
    SUBCASE("exposure normalization removes the bias") {
        const Image scene = demosaic_bilinear(oracle::textured(8, 8), BayerPattern());
        const Image y1 = cfa_apply(scene, BayerPattern());
        const Burst b = make_burst({y1 * 0.5, y1}, {0.5, 1.0});
        const Image z = init_z(b, identity_fields(b));
        const Image ref = demosaic_bilinear(y1, BayerPattern());
        for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-13));
    }
    SUBCASE("saturated samples are skipped") {
        const Burst b = make_burst({Image(6, 6, 1, 0.2), Image(6, 6, 1, 1.0)}, {1.0, 8.0});
        const Image z = init_z(b, identity_fields(b));
        for (double v : z.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
    }
}

TEST_CASE("z_update") {
    SUBCASE("one unit step with a single frame lands on the data at measured sites") {
        std::mt19937_64 rng(5);
        const Image y = oracle::random_image(6, 6, 1, rng, 0.0, 1.0);
        const Burst b = make_burst({y}, {1.0});
        const std::vector<FrameOperator> ops = frame_operators(b, identity_fields(b));
        const std::vector<Image> w = {Image(6, 6, 1, 1.0)};
        const Image z0 = oracle::random_image(6, 6, 3, rng);
        const Image z1 = z_update(z0, z0, 0.0, 1.0, 1, b, ops, w);
        const BayerPattern p;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                for (int c = 0; c < 3; ++c)
                    CHECK(z1(i, j, c) == doctest::Approx(c == p.channel_at(i, j) ? y(i, j) : z0(i, j, c)).epsilon(1e-14));
    }
    SUBCASE("fixed point at the solution of the normal equations") {
        const SmallScene s = small_scene(16, 2, {1.0, 0.5, 2.0}, 3);
        const std::vector<FrameOperator> ops = frame_operators(s.burst, s.fields);
        const std::vector<Image> w = fusion_weights(s.burst, ops);
        const double eta = 0.5;
        std::mt19937_64 rng(6);
        const Image x = oracle::random_image(16, 16, 3, rng, 0.0, 1.0);
        auto H = [&](const Image& v) {
            Image out = v * eta;
            for (std::size_t k = 0; k < ops.size(); ++k) {
                Image r = ops[k].apply(v);
                for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] *= w[k].values()[i] * w[k].values()[i];
                out += ops[k].adjoint(r);
            }
            return out;
        };
        Image rhs = x * eta;
        for (std::size_t k = 0; k < ops.size(); ++k) {
            Image r = s.burst.frames[k].data;
            for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] *= w[k].values()[i] * w[k].values()[i];
            rhs += ops[k].adjoint(r);
        }
        const Image zs = oracle::conjugate_gradient(H, rhs, Image(16, 16, 3), 5000, 1e-15);
        const double L = lipschitz_estimate(ops, w);
        const Image z1 = z_update(zs, x, eta, 0.9 / (L + eta), 3, s.burst, ops, w);
        for (std::size_t i = 0; i < zs.size(); ++i) CHECK(std::abs(z1.values()[i] - zs.values()[i]) <= 1e-8);
    }
    SUBCASE("surrogate descends with the automatic step") {
        const SmallScene s = small_scene(24, 2, {1.0, 0.7, 1.4, 2.0}, 8);
        const std::vector<FrameOperator> ops = frame_operators(s.burst, s.fields);
        const std::vector<Image> w = fusion_weights(s.burst, ops);
        const Image x = init_z(s.burst, s.fields);
        const double eta = 1.0, L = lipschitz_estimate(ops, w);
        std::vector<double> trace{surrogate_objective(x, x, eta, s.burst, ops, w)};
        z_update(x, x, eta, 0.9 / (L + eta), 10, s.burst, ops, w, &trace);
        REQUIRE(trace.size() == 11);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] * (1.0 + 1e-12));
        CHECK(trace.back() < trace.front());
    }
    SUBCASE("divergence is reported") {
        const SmallScene s = small_scene(8, 1, {1.0}, 2);
        const std::vector<FrameOperator> ops = frame_operators(s.burst, s.fields);
        const std::vector<Image> w = fusion_weights(s.burst, ops);
        const Image x = init_z(s.burst, s.fields);
        CHECK_THROWS_AS(z_update(x + Image(8, 8, 3, 1.0), x, 0.0, 1e200, 40, s.burst, ops, w), NumericalError);
    }
}

TEST_CASE("power iteration") {
    const Burst b = make_burst({Image(8, 8, 1, 0.5)}, {1.0});
    const std::vector<Image> w = {Image(8, 8, 1, 1.0)};
    CHECK(lipschitz_estimate(frame_operators(b, identity_fields(b)), w) == doctest::Approx(1.0).epsilon(0.01));
    const Burst b2 = make_burst({Image(8, 8, 1, 0.5)}, {2.0});
    CHECK(lipschitz_estimate(frame_operators(b2, identity_fields(b2)), w) == doctest::Approx(4.0).epsilon(0.01));

    const SmallScene s = small_scene(24, 2, {1.0, 0.5, 2.0}, 4);
    const std::vector<FrameOperator> ops = frame_operators(s.burst, s.fields);
    const std::vector<double> est = power_iteration(ops, fusion_weights(s.burst, ops), 20);
    REQUIRE(est.size() == 20);
    for (std::size_t i = 1; i < est.size(); ++i) CHECK(est[i] >= est[i - 1] * (1.0 - 1e-12));
}

TEST_CASE("HQS configuration") {
    HqsConfig c;
    CHECK(c.eta(0) == 1.0);
    CHECK(c.eta(2) == 4.0);
    CHECK(c.eta(4) == 16.0);
    CHECK(c.gamma(1) == 0.02);
    CHECK(c.gamma(7) == 0.01);
    c.validate();
    c.etas = {2.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = HqsConfig{};
    c.stages = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("reconstruct: identical frames at x1 give the bilinear demosaic") {
    std::mt19937_64 rng(12);
    Image y = oracle::random_image(10, 12, 1, rng, 0.05, 0.9);
    y(3, 4) = 1.0;  // one saturated sample
    const Burst b = make_burst({y, y, y}, {1.0, 1.0, 1.0});
    HqsConfig c;
    c.gammas = {0.0};
    const ReconstructionResult r = reconstruct(b, c, identity_fields(b));
    const Image ref = demosaic_bilinear(y, BayerPattern());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.x.values()[i] - ref.values()[i]) <= 1e-12);
    CHECK(r.trace.size() == 3);
}

TEST_CASE("reconstruct: descent within stages, finite output, determinism") {
    const SmallScene s = small_scene(32, 2, {1.0, 0.5, 2.0, 1.0, 0.25}, 21);
    HqsConfig c;
    c.gd_steps = 5;
    const ReconstructionResult r = reconstruct(s.burst, c, s.fields);
    for (const StageTrace& st : r.trace) {
        REQUIRE(st.objective.size() == 6);
        for (std::size_t i = 1; i < st.objective.size(); ++i) CHECK(st.objective[i] <= st.objective[i - 1] * (1.0 + 1e-12));
        CHECK(st.step == doctest::Approx(0.9 / (st.lipschitz + st.eta)));
    }
    CHECK(all_finite(r.x));
    const ReconstructionResult again = reconstruct(s.burst, c, s.fields);
    CHECK(again.x == r.x);
}

TEST_CASE("reconstruct: oracle warps converge to the normal-equation solution") {
    const SmallScene s = small_scene(32, 1, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, 33);
    HqsConfig c;
    c.prior = std::make_shared<IdentityPrior>();
    c.gd_steps = 2000;
    const ReconstructionResult r = reconstruct(s.burst, c, s.fields);

    const std::vector<FrameOperator> ops = frame_operators(s.burst, s.fields);
    const std::vector<Image> w = fusion_weights(s.burst, ops);
    auto H = [&](const Image& v) {
        Image out(v.height(), v.width(), 3);
        for (std::size_t k = 0; k < ops.size(); ++k) {
            Image q = ops[k].apply(v);
            for (std::size_t i = 0; i < q.size(); ++i) q.values()[i] *= w[k].values()[i] * w[k].values()[i];
            out += ops[k].adjoint(q);
        }
        return out;
    };
    Image rhs(32, 32, 3);
    for (std::size_t k = 0; k < ops.size(); ++k) {
        Image q = s.burst.frames[k].data;
        for (std::size_t i = 0; i < q.size(); ++i) q.values()[i] *= w[k].values()[i] * w[k].values()[i];
        rhs += ops[k].adjoint(q);
    }
    const Image cg = oracle::conjugate_gradient(H, rhs, init_z(s.burst, s.fields), 3000, 1e-14);
    double err_gd = 0.0, err_cg = 0.0;
    for (int y = 2; y < 30; ++y)
        for (int x = 2; x < 30; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                err_gd = std::max(err_gd, std::abs(r.x(y, x, ch) - cg(y, x, ch)));
                err_cg = std::max(err_cg, std::abs(cg(y, x, ch) - s.gt(y, x, ch)));
            }
    CHECK(err_cg < 1e-6);  // noise-free and well posed: the normal equations recover the scene
    CHECK(err_gd < 5e-4);
}

TEST_CASE("reconstruct: stress burst with saturated and black frames stays finite") {
    const SmallScene s = small_scene(16, 1, {1.0, 1.0, 1.0}, 5);
    Burst b = s.burst;
    b.frames[1].data.fill(1.0);
    b.frames[2].data.fill(0.0);
    for (const char* prior : {"none", "tvl1"}) {
        HqsConfig c;
        c.prior = make_prior(prior);
        c.confidence = std::make_shared<ResidualConfidence>();
        const ReconstructionResult r = reconstruct(b, c, s.fields);
        CHECK(all_finite(r.x));
        for (const Image& w : r.weights) CHECK(all_finite(w));
    }
    Burst dark = s.burst;
    for (RawFrame& f : dark.frames) f.data.fill(0.0);
    CHECK(all_finite(reconstruct(dark, HqsConfig{}, s.fields).x));
}

TEST_CASE("reconstruct: registration path and warp refinement") {
    SynthConfig sc;
    sc.frames = 4;
    sc.crop = 96;
    sc.scale = 2;
    sc.noise.enabled = false;
    sc.tile_size = 96;
    sc.seed = 7;
    sc.gt_gain_ev_min = sc.gt_gain_ev_max = 0.0;
    sc.ev_min = -1.0;
    sc.ev_max = 1.0;
    const BurstSample sample = synthesize_random_burst(sc);
    HqsConfig c;
    c.refine_warps = true;
    const ReconstructionResult r = reconstruct(sample.burst, c);
    REQUIRE(r.registration.has_value());
    CHECK(r.fields.size() == 4);
    CHECK(all_finite(r.x));
    CHECK(r.x.height() == 96);
}
