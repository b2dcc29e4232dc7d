#include <cmath>

#include "svt/gradsuite.hpp"
#include "svt/warpfield.hpp"
#include "test_util.hpp"

using namespace svt;

namespace {

WarpStack random_stack(int h, int w, int scales, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    WarpStack s(h, w, scales);
    for (int l = 0; l < scales; ++l) {
        s.level(l).u = test::random_field(h >> l, w >> l, lo, hi, seed * 31 + 2 * l);
        s.level(l).v = test::random_field(h >> l, w >> l, lo, hi, seed * 31 + 2 * l + 1);
    }
    return s;
}

bool monotone_exhaustive(const TexCoords& t) {
    for (int j = 0; j < t.height(); ++j)
        for (int i = 0; i + 1 < t.width(); ++i)
            if (t.u(i + 1, j) < t.u(i, j)) return false;
    for (int j = 0; j + 1 < t.height(); ++j)
        for (int i = 0; i < t.width(); ++i)
            if (t.v(i, j + 1) < t.v(i, j)) return false;
    return true;
}

}  // namespace

TEST(Kernel, Values) {
    const auto k = pyramid_kernel();
    const double expect[5] = {0.0875, 0.35, 0.525, 0.35, 0.0875};
    double sum = 0.0;
    for (int t = 0; t < 5; ++t) {
        EXPECT_NEAR(k[t], expect[t], 1e-15);
        sum += k[t];
    }
    EXPECT_NEAR(sum, 1.4, 1e-15);
    EXPECT_EQ(k[0], k[4]);
    EXPECT_EQ(k[1], k[3]);
}

TEST(Synthesize, SingleScalePassthrough) {
    WarpStack s(4, 5, 1);
    for (double& x : s.level(0).u.values()) x = 1.0;
    for (double& x : s.level(0).v.values()) x = 1.0;
    GradField g = synthesize(s);
    for (double x : g.u.values()) EXPECT_EQ(x, 1.0);
    for (double& x : s.level(0).u.values()) x = -1.0;
    g = synthesize(s);
    for (double x : g.u.values()) EXPECT_EQ(x, 0.0);
}

TEST(Synthesize, TwoScalesMatchDirectConvolution) {
    const double c = 0.7;
    WarpStack s(4, 4, 2);
    for (double& x : s.level(1).u.values()) x = c;
    const GradField g = synthesize(s);

    // Zero-inserted 4x4 grid convolved with the 2D outer product of 2k,
    // reflecting indices about the edge samples.
    const auto k = pyramid_kernel();
    auto refl = [](int x) { return x < 0 ? -x : (x > 3 ? 6 - x : x); };
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            double acc = 0.0;
            for (int b = 0; b < 5; ++b)
                for (int a = 0; a < 5; ++a) {
                    const int x = refl(i + a - 2), y = refl(j + b - 2);
                    const double z = (x % 2 == 0 && y % 2 == 0) ? c : 0.0;
                    acc += 4.0 * k[a] * k[b] * z;
                }
            EXPECT_NEAR(g.u(i, j), acc, 1e-12) << i << "," << j;
            EXPECT_EQ(g.v(i, j), 0.0);
        }
}

TEST(Synthesize, PreReluIsLinear) {
    const WarpStack s = random_stack(16, 16, 3, 4);
    WarpStack scaled = s;
    for (int l = 0; l < 3; ++l) {
        for (double& x : scaled.level(l).u.values()) x *= -2.5;
        for (double& x : scaled.level(l).v.values()) x *= -2.5;
    }
    const GradField a = synthesize_linear(s), b = synthesize_linear(scaled);
    for (std::size_t k = 0; k < a.u.size(); ++k) {
        EXPECT_NEAR(b.u.values()[k], -2.5 * a.u.values()[k], 1e-12);
        EXPECT_NEAR(b.v.values()[k], -2.5 * a.v.values()[k], 1e-12);
    }
}

TEST(Upsample, AdjointIdentity) {
    const ScalarField x = test::random_field(5, 6, -1, 1, 1);
    const ScalarField y = test::random_field(10, 12, -1, 1, 2);
    const ScalarField ux = upsample(x), aty = upsample_adjoint(y);
    double lhs = 0, rhs = 0;
    for (std::size_t k = 0; k < y.size(); ++k) lhs += ux.values()[k] * y.values()[k];
    for (std::size_t k = 0; k < x.size(); ++k) rhs += x.values()[k] * aty.values()[k];
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(WarpStack, RejectsInconsistentLevels) {
    std::vector<GradField> levels{GradField(8, 8), GradField(3, 4)};
    EXPECT_THROW(WarpStack{levels}, InvalidArgument);
}

TEST(WarpStack, PackUnpackRoundTrip) {
    const WarpStack s = random_stack(8, 8, 3, 9);
    WarpStack t(8, 8, 3);
    t.unpack(s.pack());
    EXPECT_EQ(t.pack(), s.pack());
    EXPECT_EQ(s.parameter_count(), 2u * (64 + 16 + 4));
}

TEST(Integrate, IdentityAndStretch) {
    const TexCoords id = integrate(GradField(5, 6, 1.0));
    const TexCoords stretch = integrate(GradField(ScalarField(5, 6, 2.0), ScalarField(5, 6, 1.0)));
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 6; ++i) {
            EXPECT_EQ(id.u(i, j), i);
            EXPECT_EQ(id.v(i, j), j);
            EXPECT_EQ(stretch.u(i, j), 2 * i);
        }
}

TEST(Integrate, RejectsNegativeIncrements) {
    GradField g(3, 3, 1.0);
    g.u(1, 1) = -0.1;
    EXPECT_THROW(integrate(g), InvalidArgument);
}

TEST(Integrate, RandomNonNegativeIsMonotone) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const GradField g(test::random_field(5, 5, 0, 2, seed), test::random_field(5, 5, 0, 2, seed + 100));
        EXPECT_TRUE(monotone_exhaustive(integrate(g)));
    }
}

TEST(Foldover, RandomStacksNeverFold) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const TexCoords t = integrate(synthesize(random_stack(16, 16, 3, seed, -3.0, 3.0)));
        EXPECT_TRUE(monotone_exhaustive(t));
        EXPECT_TRUE(t.monotone());
    }
}

TEST(L1Reg, ClosedForms) {
    EXPECT_EQ(l1_reg(GradField(4, 4, 0.0)).value, 0.0);
    EXPECT_EQ(l1_reg(GradField(4, 4, 1.0)).value, 2.0);
}

TEST(L1Reg, MatchesDirectSummation) {
    const GradField g(test::random_field(3, 3, -1, 1, 5), test::random_field(3, 3, -1, 1, 6));
    double sum = 0;
    for (std::size_t k = 0; k < 9; ++k) sum += std::abs(g.u.values()[k]) + std::abs(g.v.values()[k]);
    EXPECT_NEAR(l1_reg(g).value, sum / 9.0, 1e-15);
}

TEST(Integrability, ConstantFieldIsZero) {
    const GradFieldLoss l = integrability_loss(GradField(ScalarField(6, 5, 0.3), ScalarField(6, 5, -1.7)));
    EXPECT_LE(std::abs(l.value), 1e-12);
}

TEST(Integrability, SingleStencilHandValue) {
    // V_u(i,j) = j on 2x2: the one stencil has d(V_u)/dy = 1 and
    // d(V_v)/dx = 0, so the bracket is 2 * (0 - 1) = -2, squared over 4 pixels.
    GradField g(2, 2, 0.0);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) g.u(i, j) = j;
    EXPECT_DOUBLE_EQ(integrability_loss(g).value, 1.0);
}

TEST(Integrability, SeparableFieldIsZero) {
    // V_u varying only along i and V_v only along j is curl-free.
    const ScalarField a = test::random_field(1, 6, -1, 1, 8), b = test::random_field(1, 5, -1, 1, 9);
    GradField g(5, 6);
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 6; ++i) {
            g.u(i, j) = a(i, 0);
            g.v(i, j) = b(j, 0);
        }
    EXPECT_LE(integrability_loss(g).value, 1e-12);
    const GradField r(test::random_field(6, 6, -1, 1, 9), test::random_field(6, 6, -1, 1, 10));
    EXPECT_GT(integrability_loss(r).value, 0.0);
}

TEST(Integrability, NonNegative) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GradField g(test::random_field(5, 7, -2, 2, seed), test::random_field(5, 7, -2, 2, seed + 50));
        EXPECT_GE(integrability_loss(g).value, 0.0);
    }
}

TEST(InitIdentity, SingleScale) {
    const WarpStack s = init_identity(8, 8, 1);
    for (double x : s.level(0).u.values()) EXPECT_EQ(x, 1.0);
}

TEST(InitIdentity, ThreeScalesAt64) {
    const WarpStack s = init_identity(64, 64, 3);
    const GradField g = synthesize(s);
    for (std::size_t k = 0; k < g.u.size(); ++k) {
        EXPECT_NEAR(g.u.values()[k], 1.0, 1e-9);
        EXPECT_NEAR(g.v.values()[k], 1.0, 1e-9);
    }
    const TexCoords t = integrate(g);
    const TexCoords id = TexCoords::identity(64, 64);
    EXPECT_LE(test::max_abs_diff(t.u.values(), id.u.values()), 1e-7);
    EXPECT_LE(test::max_abs_diff(t.v.values(), id.v.values()), 1e-7);
}

TEST(WarpStackIo, SaveLoadRoundTrip) {
    const auto dir = test::temp_dir();
    const WarpStack s = random_stack(8, 8, 2, 3);
    save_warpstack(s, dir / "stack");
    const WarpStack t = load_warpstack(dir / "stack");
    ASSERT_EQ(t.scales(), 2);
    const auto a = s.pack(), b = t.pack();
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(b[k], static_cast<double>(static_cast<float>(a[k])));
}

TEST(TexCoordsIo, RoundTrip) {
    const auto dir = test::temp_dir();
    const TexCoords t = TexCoords::identity(5, 7);
    write_texcoords(t, dir / "uv.pfm");
    const TexCoords r = read_texcoords(dir / "uv.pfm");
    EXPECT_EQ(r.u, t.u);
    EXPECT_EQ(r.v, t.v);
}

class WarpGradients : public ::testing::TestWithParam<const char*> {};

TEST_P(WarpGradients, MatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const GradCase c = make_grad_case(GetParam(), seed, 8);
        const GradReport r = run_grad_case(c, seed);
        EXPECT_LE(r.error, c.tolerance) << GetParam() << " seed " << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(Ops, WarpGradients,
                         ::testing::Values("synthesize", "integrate", "l1-reg", "integrability"));
