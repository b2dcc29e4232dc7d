#include <chrono>
#include <cmath>
#include <cstring>

#include "svt/guidance.hpp"
#include "svt/io.hpp"
#include "svt/optimize.hpp"
#include "svt/render.hpp"
#include "svt/wire.hpp"
#include "test_util.hpp"

using namespace svt;

#ifndef SVT_STUB_PATH
#error "SVT_STUB_PATH must name the guidance stub executable"
#endif

namespace {

std::string stub(const std::string& args) { return std::string(SVT_STUB_PATH) + " " + args; }

double narrow(double x) { return static_cast<double>(static_cast<float>(x)); }

GuidanceRequest request_for(const ImageField& img, std::uint64_t step = 0, std::uint64_t seed = 0) {
    return {img, step, seed};
}

}  // namespace

TEST(Oracle, FixedPointAndShift) {
    const ImageField t = test::random_image(4, 5, 3, 1);
    const GuidanceResponse same = OracleGuidance(t).gradient(request_for(t));
    for (double x : same.cotangent.values()) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(same.diagnostic_loss, 0.0);

    ImageField shifted = t;
    for (double& x : shifted.values()) x += 0.1;
    const GuidanceResponse r = OracleGuidance(t).gradient(request_for(shifted));
    for (double x : r.cotangent.values()) EXPECT_NEAR(x, 0.1, 1e-15);
}

TEST(Oracle, ElementwiseDifference) {
    const ImageField t = test::random_image(6, 6, 3, 2), img = test::random_image(6, 6, 3, 3);
    const GuidanceResponse r = OracleGuidance(t).gradient(request_for(img));
    for (std::size_t k = 0; k < img.size(); ++k) EXPECT_EQ(r.cotangent.values()[k], img.values()[k] - t.values()[k]);
}

TEST(Oracle, CotangentIsGradientOfHalfSumOfSquares) {
    const ImageField t = test::random_image(5, 5, 3, 4);
    OracleGuidance g(t);
    const double n = static_cast<double>(t.size());
    DifferentiableOp op;
    op.value = [&](std::span<const double> x) {
        const ImageField img(5, 5, 3, std::vector<double>(x.begin(), x.end()));
        return n * g.gradient(request_for(img)).diagnostic_loss;
    };
    op.gradient = [&](std::span<const double> x) {
        const ImageField img(5, 5, 3, std::vector<double>(x.begin(), x.end()));
        const ImageField c = g.gradient(request_for(img)).cotangent;
        return std::vector<double>(c.values().begin(), c.values().end());
    };
    const ImageField x0 = test::random_image(5, 5, 3, 5);
    EXPECT_LE(grad_check(op, x0.values()).max_relative_error, 1e-6);
}

TEST(NoisyOracle, SigmaZeroIsOracle) {
    const ImageField t = test::random_image(4, 4, 3, 6), img = test::random_image(4, 4, 3, 7);
    const auto a = NoisyOracleGuidance(t, 0.0).gradient(request_for(img, 3, 9));
    const auto b = OracleGuidance(t).gradient(request_for(img, 3, 9));
    EXPECT_EQ(a.cotangent, b.cotangent);
}

TEST(NoisyOracle, ReproducibleForEqualSeedAndStep) {
    const ImageField t = test::random_image(4, 4, 3, 6), img = test::random_image(4, 4, 3, 7);
    NoisyOracleGuidance g(t, 0.5);
    const auto a = g.gradient(request_for(img, 12, 34));
    const auto b = g.gradient(request_for(img, 12, 34));
    const auto c = g.gradient(request_for(img, 13, 34));
    EXPECT_EQ(a.cotangent, b.cotangent);
    EXPECT_NE(a.cotangent, c.cotangent);
}

TEST(NoisyOracle, MeanConvergesPerPixel) {
    // Over N steps the per-pixel mean noise has standard error sigma / sqrt(N);
    // 3 standard errors hold for all but a small fraction of pixels.
    const int n = 64, steps = 10000;
    const double sigma = 1.0;
    const ImageField t = test::random_image(n, n, 1, 8), img = test::random_image(n, n, 1, 9);
    NoisyOracleGuidance g(t, sigma);
    std::vector<double> sum(t.size(), 0.0);
    for (int s = 0; s < steps; ++s) {
        const auto r = g.gradient(request_for(img, static_cast<std::uint64_t>(s), 77));
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += r.cotangent.values()[k];
    }
    const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(steps));
    std::size_t outside = 0;
    double global = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const double dev = sum[k] / steps - (img.values()[k] - t.values()[k]);
        global += dev;
        if (std::abs(dev) > bound) ++outside;
    }
    EXPECT_LE(static_cast<double>(outside), 0.01 * static_cast<double>(sum.size()));
    EXPECT_LE(std::abs(global / sum.size()), 3.0 * sigma / std::sqrt(static_cast<double>(steps) * sum.size()));
}

TEST(Wire, HeaderLayout) {
    wire::Header h;
    h.type = wire::MessageType::grad_request;
    h.width = 0x01020304;
    h.height = 2;
    h.channels = 3;
    h.step = 0x1122334455667788ULL;
    h.seed = 9;
    const auto bytes = wire::encode_header(h);
    ASSERT_EQ(bytes.size(), 33u);
    EXPECT_EQ(std::memcmp(bytes.data(), "SVTG", 4), 0);
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0x04);
    EXPECT_EQ(bytes[8], 0x01);
    EXPECT_EQ(bytes[17], 0x88);
    EXPECT_EQ(bytes[24], 0x11);
    EXPECT_EQ(bytes[25], 9);
    const wire::Header back = wire::decode_header(bytes);
    EXPECT_EQ(back.width, h.width);
    EXPECT_EQ(back.step, h.step);
    EXPECT_EQ(back.seed, h.seed);
}

TEST(Wire, RejectsBadMagicAndType) {
    auto bytes = wire::encode_header(wire::Header{});
    bytes[0] = 'X';
    EXPECT_THROW(wire::decode_header(bytes), wire::ProtocolError);
    bytes = wire::encode_header(wire::Header{});
    bytes[4] = 9;
    EXPECT_THROW(wire::decode_header(bytes), wire::ProtocolError);
}

TEST(Wire, PayloadsNarrowToF32) {
    wire::Header h;
    h.width = 2;
    h.height = 1;
    h.channels = 1;
    const std::vector<double> v{0.1, -2.5};
    const auto req = wire::encode_request(h, v);
    ASSERT_EQ(req.size(), 33u + 8u);
    const auto back = wire::decode_f32(std::span(req).subspan(33), 2);
    EXPECT_EQ(back[0], narrow(0.1));
    EXPECT_EQ(back[1], -2.5);
    const auto resp = wire::encode_response(h, v, 0.25);
    ASSERT_EQ(resp.size(), 33u + 12u);
    EXPECT_EQ(resp[4], 2);
    EXPECT_EQ(wire::decode_f32(std::span(resp).subspan(41), 1)[0], 0.25);
}

TEST(Wire, ShutdownAndErrorFrames) {
    const auto s = wire::encode_shutdown();
    ASSERT_EQ(s.size(), 33u);
    EXPECT_EQ(s[4], 3);
    const auto e = wire::encode_error("bad");
    ASSERT_EQ(e.size(), 33u + 4u + 3u);
    EXPECT_EQ(e[4], 4);
    EXPECT_EQ(wire::decode_u32(std::span(e).subspan(33)), 3u);
    EXPECT_EQ(std::string(e.begin() + 37, e.end()), "bad");
}

TEST(Remote, ZeroStubRoundTripsExactly) {
    RemoteGuidance g(stub("zero"));
    const ImageField img = test::random_image(6, 5, 3, 10);
    const auto r = g.gradient(request_for(img, 1, 2));
    ASSERT_TRUE(r.cotangent.same_shape(img));
    for (double x : r.cotangent.values()) EXPECT_EQ(x, 0.0);
    EXPECT_TRUE(g.shutdown());
}

TEST(Remote, EchoMinusHalfMatchesLocalAfterNarrowing) {
    RemoteGuidance g(stub("echo-minus-half"));
    const ImageField img = test::random_image(7, 6, 3, 11);
    for (std::uint64_t step = 0; step < 3; ++step) {
        const auto r = g.gradient(request_for(img, step, 0));
        for (std::size_t k = 0; k < img.size(); ++k)
            EXPECT_EQ(r.cotangent.values()[k], narrow(narrow(img.values()[k]) - 0.5));
    }
    EXPECT_TRUE(g.shutdown());
}

TEST(Remote, ShutdownIsPrompt) {
    RemoteGuidance g(stub("zero"));
    g.gradient(request_for(ImageField(2, 2, 1, 0.5)));
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_TRUE(g.shutdown());
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
}

namespace {

GuidanceError::Kind failure_kind(const std::string& mode, std::chrono::milliseconds timeout = std::chrono::seconds(20)) {
    RemoteGuidance g(stub(mode), timeout);
    try {
        g.gradient(request_for(ImageField(3, 3, 3, 0.5)));
    } catch (const GuidanceError& e) {
        // A broken endpoint keeps failing with the same kind.
        try {
            g.gradient(request_for(ImageField(3, 3, 3, 0.5)));
        } catch (const GuidanceError& again) {
            EXPECT_EQ(again.kind(), e.kind()) << mode;
        }
        return e.kind();
    }
    ADD_FAILURE() << mode << " did not fail";
    return GuidanceError::Kind::spawn;
}

}  // namespace

TEST(Remote, FailureKindsAreDistinct) {
    EXPECT_EQ(failure_kind("die"), GuidanceError::Kind::child_exit);
    EXPECT_EQ(failure_kind("bad-magic"), GuidanceError::Kind::protocol);
    EXPECT_EQ(failure_kind("nan"), GuidanceError::Kind::nan_payload);
    EXPECT_EQ(failure_kind("hang", std::chrono::milliseconds(300)), GuidanceError::Kind::timeout);
}

TEST(Remote, ErrorFrameLeavesChildUsable) {
    RemoteGuidance g(stub("error"));
    for (int k = 0; k < 2; ++k) {
        try {
            g.gradient(request_for(ImageField(2, 2, 1, 0.5)));
            ADD_FAILURE() << "no error frame";
        } catch (const GuidanceError& e) {
            EXPECT_EQ(e.kind(), GuidanceError::Kind::remote_error);
        }
    }
    EXPECT_TRUE(g.shutdown());
}

TEST(Remote, MissingExecutableIsChildExit) {
    RemoteGuidance g("/nonexistent/guidance-server");
    try {
        g.gradient(request_for(ImageField(2, 2, 1, 0.5)));
        ADD_FAILURE() << "no failure";
    } catch (const GuidanceError& e) {
        EXPECT_EQ(e.kind(), GuidanceError::Kind::child_exit);
    }
}

namespace {

// Answers with the oracle while checking a remote endpoint on every request.
class CompareGuidance : public Guidance {
public:
    CompareGuidance(Guidance& local, Guidance& remote) : local_(local), remote_(remote) {}
    GuidanceResponse gradient(const GuidanceRequest& r) override {
        GuidanceResponse a = local_.gradient(r);
        const GuidanceResponse b = remote_.gradient(r);
        max_diff = std::max(max_diff, test::max_abs_diff(a.cotangent.values(), b.cotangent.values()));
        ++steps;
        return a;
    }
    double max_diff = 0.0;
    int steps = 0;

private:
    Guidance& local_;
    Guidance& remote_;
};

}  // namespace

TEST(Remote, StubOracleIsInterchangeablePerStep) {
    const auto dir = test::temp_dir();
    const int n = 16;
    ImageField input(n, n, 3, 0.6);
    ScalarField m(n, n, 0.0);
    for (int j = 3; j < 13; ++j)
        for (int i = 3; i < 13; ++i) m(i, j) = 1.0;
    const Mask mask(m);
    const ImageField texture = checkerboard(n, n, 4, 3);
    ImageField target = blend(input, texture, mask, 0.5);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) target(i, j, 1) *= 0.9;
    write_pfm(target, dir / "target.pfm");

    OracleGuidance local(read_pfm(dir / "target.pfm"));
    RemoteGuidance remote(stub("oracle --target " + (dir / "target.pfm").string()));
    CompareGuidance both(local, remote);
    StageConfig cfg;
    cfg.iterations = 40;
    cfg.snapshot_interval = 20;
    cfg.scales = 2;
    cfg.lr = 1e-3;
    stage1(input, mask, texture, both, cfg);
    EXPECT_EQ(both.steps, 40);
    EXPECT_LE(both.max_diff, 1e-6);
    EXPECT_TRUE(remote.shutdown());
}
