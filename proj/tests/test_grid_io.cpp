#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "svt/io.hpp"
#include "test_util.hpp"

using namespace svt;
using svt::test::temp_dir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& header, const std::vector<unsigned char>& payload) {
    std::ofstream f(p, std::ios::binary);
    f << header;
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

std::vector<unsigned char> f32_le(std::initializer_list<float> values) {
    std::vector<unsigned char> out;
    for (float v : values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
    return out;
}

// Minimal PFM parser written against the format description, independent of
// read_pfm: header tokens, then rows bottom-to-top in the declared endianness.
std::vector<float> independent_pfm(const std::filesystem::path& p, int& w, int& h, int& c) {
    std::ifstream f(p, std::ios::binary);
    std::string magic;
    double scale;
    f >> magic >> w >> h >> scale;
    f.get();
    c = magic == "PF" ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * c * 4));
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    std::vector<float> top_down(raw.size() / 4);
    for (int row = 0; row < h; ++row)
        for (int k = 0; k < w * c; ++k) {
            const unsigned char* b = &raw[static_cast<std::size_t>((row * w * c + k) * 4)];
            std::uint32_t bits = scale < 0 ? (b[0] | b[1] << 8 | b[2] << 16 | std::uint32_t(b[3]) << 24)
                                           : (b[3] | b[2] << 8 | b[1] << 16 | std::uint32_t(b[0]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            top_down[static_cast<std::size_t>((h - 1 - row) * w * c + k)] = v;
        }
    return top_down;
}

}  // namespace

TEST(Pfm, GrayscaleFromRawBytes) {
    const auto dir = temp_dir();
    // Rows are stored bottom-to-top: file row 0 is image row 1.
    write_bytes(dir / "a.pfm", "Pf\n2 2\n-1.0\n", f32_le({2, 3, 0, 1}));
    const ImageField img = read_pfm(dir / "a.pfm");
    ASSERT_EQ(img.channels(), 1);
    EXPECT_EQ(img(0, 0, 0), 0.0);
    EXPECT_EQ(img(1, 0, 0), 1.0);
    EXPECT_EQ(img(0, 1, 0), 2.0);
    EXPECT_EQ(img(1, 1, 0), 3.0);
}

TEST(Pfm, WriteReadTwoByTwo) {
    const auto dir = temp_dir();
    const ScalarField f(2, 2, std::vector<double>{0, 1, 2, 3});
    write_pfm(f, dir / "f.pfm");
    EXPECT_EQ(read_pfm_scalar(dir / "f.pfm"), f);
}

TEST(Pfm, ColorOneByOne) {
    const auto dir = temp_dir();
    write_bytes(dir / "c.pfm", "PF\n1 1\n-1.0\n", f32_le({0.5f, 0.5f, 0.5f}));
    const ImageField img = read_pfm(dir / "c.pfm");
    ASSERT_EQ(img.channels(), 3);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(img(0, 0, c), 0.5);
}

TEST(Pfm, BigEndianPayload) {
    const auto dir = temp_dir();
    std::vector<unsigned char> be = f32_le({1.5f});
    std::reverse(be.begin(), be.end());
    write_bytes(dir / "b.pfm", "Pf\n1 1\n1.0\n", be);
    EXPECT_EQ(read_pfm_scalar(dir / "b.pfm")(0, 0), 1.5);
}

TEST(Pfm, RejectsZeroScale) {
    const auto dir = temp_dir();
    write_bytes(dir / "z.pfm", "Pf\n1 1\n0.0\n", f32_le({1.0f}));
    EXPECT_THROW(read_pfm(dir / "z.pfm"), FormatError);
}

TEST(Pfm, RejectsTruncatedPayload) {
    const auto dir = temp_dir();
    write_bytes(dir / "t.pfm", "Pf\n2 2\n-1.0\n", f32_le({1.0f, 2.0f}));
    EXPECT_THROW(read_pfm(dir / "t.pfm"), FormatError);
}

TEST(Pfm, RejectsNaNPayload) {
    const auto dir = temp_dir();
    write_bytes(dir / "n.pfm", "Pf\n1 1\n-1.0\n", f32_le({std::numeric_limits<float>::quiet_NaN()}));
    EXPECT_THROW(read_pfm(dir / "n.pfm"), FormatError);
}

TEST(Pfm, WriteRejectsNaN) {
    const auto dir = temp_dir();
    ScalarField f(2, 2, 0.0);
    f(1, 1) = std::nan("");
    EXPECT_ANY_THROW(write_pfm(f, dir / "x.pfm"));
}

TEST(Pfm, MissingFileIsIoError) {
    EXPECT_THROW(read_pfm("/nonexistent/dir/x.pfm"), IoError);
}

TEST(Pfm, RoundTripIsF32Narrowing) {
    const auto dir = temp_dir();
    const ImageField img = test::random_image(5, 7, 3, 11);
    write_pfm(img, dir / "r.pfm");
    const ImageField back = read_pfm(dir / "r.pfm");
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t k = 0; k < img.size(); ++k)
        EXPECT_EQ(back.values()[k], static_cast<double>(static_cast<float>(img.values()[k])));
}

TEST(Pfm, IndependentReaderAgrees) {
    const auto dir = temp_dir();
    ScalarField sphere(9, 11);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 11; ++i) sphere(i, j) = std::sqrt(std::max(0.0, 16.0 - (i - 5) * (i - 5) - (j - 4) * (j - 4)));
    write_pfm(sphere, dir / "s.pfm");
    int w = 0, h = 0, c = 0;
    const std::vector<float> v = independent_pfm(dir / "s.pfm", w, h, c);
    ASSERT_EQ(w, 11);
    ASSERT_EQ(h, 9);
    ASSERT_EQ(c, 1);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 11; ++i) EXPECT_EQ(v[static_cast<std::size_t>(j * 11 + i)], static_cast<float>(sphere(i, j)));
}

TEST(Pfm, BytesAreDeterministic) {
    const auto dir = temp_dir();
    const ImageField img = test::random_image(4, 3, 3, 5);
    write_pfm(img, dir / "a.pfm");
    write_pfm(img, dir / "b.pfm");
    std::ifstream a(dir / "a.pfm", std::ios::binary), b(dir / "b.pfm", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb);
    EXPECT_EQ(sa.substr(0, 3), "PF\n");
}

TEST(Pnm, GrayEndpoints) {
    const auto dir = temp_dir();
    write_bytes(dir / "g.pgm", "P5\n2 1\n255\n", {0, 255});
    const ImageField img = read_pnm(dir / "g.pgm");
    EXPECT_EQ(img(0, 0, 0), 0.0);
    EXPECT_EQ(img(1, 0, 0), 1.0);
}

TEST(Pnm, ColorLinearScale) {
    const auto dir = temp_dir();
    write_bytes(dir / "c.ppm", "P6\n# comment\n1 1\n255\n", {0, 128, 255});
    const ImageField img = read_pnm(dir / "c.ppm");
    ASSERT_EQ(img.channels(), 3);
    EXPECT_EQ(img(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(img(0, 0, 1), 128.0 / 255.0);
    EXPECT_EQ(img(0, 0, 2), 1.0);
}

TEST(Pnm, QuantizationBound) {
    const auto dir = temp_dir();
    ImageField img(8, 8, 3);
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i)
            for (int c = 0; c < 3; ++c) img(i, j, c) = ((i / 2 + j / 2) % 2 == 0) ? 0.9 : 0.3 + 0.01 * c;
    write_pnm(img, dir / "b.ppm");
    const ImageField back = read_pnm(dir / "b.ppm");
    EXPECT_LE(test::max_abs_diff(back.values(), img.values()), 1.0 / (2.0 * 255.0) + 1e-15);
}

TEST(Pnm, ReadMaskThresholds) {
    const auto dir = temp_dir();
    write_bytes(dir / "m.pgm", "P5\n3 1\n255\n", {0, 127, 200});
    const Mask m = read_mask(dir / "m.pgm");
    EXPECT_FALSE(m(0, 0));
    EXPECT_FALSE(m(1, 0));
    EXPECT_TRUE(m(2, 0));
}

TEST(Pnm, RejectsBadMagic) {
    const auto dir = temp_dir();
    write_bytes(dir / "x.pgm", "P2\n1 1\n255\n", {0});
    EXPECT_THROW(read_pnm(dir / "x.pgm"), FormatError);
}

TEST(Mask, RejectsNonBinaryAndEmpty) {
    ScalarField f(2, 2, 0.0);
    EXPECT_THROW(Mask{f}, InvalidArgument);
    f(0, 0) = 0.5;
    EXPECT_THROW(Mask{f}, InvalidArgument);
    f(0, 0) = 1.0;
    EXPECT_NO_THROW(Mask{f});
}

TEST(MaskedStats, ConstantField) {
    const ScalarField f(4, 4, 5.0);
    ScalarField m(4, 4, 0.0);
    m(1, 1) = m(2, 3) = m(0, 2) = 1.0;
    const Stats s = masked_stats(f, Mask(m));
    EXPECT_EQ(s.mean, 5.0);
    EXPECT_EQ(s.std, 0.0);
}

TEST(MaskedStats, TwoPoints) {
    const ScalarField f(1, 2, std::vector<double>{1, 3});
    const Stats s = masked_stats(f, test::full_mask(1, 2));
    EXPECT_EQ(s.mean, 2.0);
    EXPECT_EQ(s.std, 1.0);
}

TEST(MaskedStats, SphereMatchesTwoPass) {
    const int n = 20;
    ScalarField d(n, n);
    ScalarField m(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double r2 = 64.0 - (i - 9.5) * (i - 9.5) - (j - 9.5) * (j - 9.5);
            d(i, j) = r2 > 0 ? std::sqrt(r2) : 0.0;
            m(i, j) = r2 > 0 ? 1.0 : 0.0;
        }
    std::vector<double> fg;
    for (std::size_t k = 0; k < d.size(); ++k)
        if (m.values()[k] == 1.0) fg.push_back(d.values()[k]);
    long double sum = 0;
    for (double v : fg) sum += v;
    const long double mean = sum / fg.size();
    long double ss = 0;
    for (double v : fg) ss += (v - mean) * (v - mean);
    const Stats s = masked_stats(d, Mask(m));
    EXPECT_NEAR(s.mean, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(static_cast<double>(ss / fg.size())), 1e-12);
}

TEST(MaskedStats, IgnoresBackground) {
    ScalarField m(3, 3, 0.0);
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    const Mask mask(m);
    ScalarField a = test::random_field(3, 3, -1, 1, 3);
    ScalarField b = a;
    b(1, 0) = 100.0;
    b(2, 1) = -7.0;
    const Stats sa = masked_stats(a, mask), sb = masked_stats(b, mask);
    EXPECT_EQ(sa.mean, sb.mean);
    EXPECT_EQ(sa.std, sb.std);
}

TEST(Grid, InteriorForeground) {
    ScalarField m(4, 4, 1.0);
    m(0, 1) = 0.0;
    const Mask mask(m);
    EXPECT_FALSE(interior_foreground(mask, 1, 1));
    EXPECT_TRUE(interior_foreground(mask, 2, 2));
    EXPECT_FALSE(interior_foreground(mask, 0, 2));
}
