#include "svt/warpfield.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "svt/io.hpp"

namespace svt {

namespace {

// Whole-sample reflection: -1 -> 1, n -> n-2.
int reflect(int x, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    x %= period;
    if (x < 0) x += period;
    return x < n ? x : period - x;
}

std::array<double, 5> upsample_taps() {
    auto k = pyramid_kernel();
    for (double& t : k) t *= 2.0;
    return k;
}

// out(x, y) = sum_t w[t] * in(reflect(x + t - 2), y), along one axis.
ScalarField convolve_axis(const ScalarField& in, bool along_i) {
    const auto w = upsample_taps();
    ScalarField out(in.height(), in.width());
    for (int j = 0; j < in.height(); ++j) {
        for (int i = 0; i < in.width(); ++i) {
            double acc = 0.0;
            for (int t = 0; t < 5; ++t) {
                acc += along_i ? w[t] * in(reflect(i + t - 2, in.width()), j)
                               : w[t] * in(i, reflect(j + t - 2, in.height()));
            }
            out(i, j) = acc;
        }
    }
    return out;
}

ScalarField convolve_axis_adjoint(const ScalarField& grad, bool along_i) {
    const auto w = upsample_taps();
    ScalarField out(grad.height(), grad.width());
    for (int j = 0; j < grad.height(); ++j) {
        for (int i = 0; i < grad.width(); ++i) {
            const double g = grad(i, j);
            for (int t = 0; t < 5; ++t) {
                if (along_i)
                    out(reflect(i + t - 2, grad.width()), j) += w[t] * g;
                else
                    out(i, reflect(j + t - 2, grad.height())) += w[t] * g;
            }
        }
    }
    return out;
}

void add_into(ScalarField& acc, const ScalarField& x) {
    auto a = acc.values();
    const auto b = x.values();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
}

}  // namespace

GradField::GradField(ScalarField u_, ScalarField v_) : u(std::move(u_)), v(std::move(v_)) {
    if (!u.same_shape(v)) throw InvalidArgument("GradField components differ in shape");
}

TexCoords::TexCoords(ScalarField u_, ScalarField v_) : u(std::move(u_)), v(std::move(v_)) {
    if (!u.same_shape(v)) throw InvalidArgument("TexCoords components differ in shape");
}

TexCoords TexCoords::identity(int height, int width) {
    TexCoords uv(height, width);
    for (int j = 0; j < height; ++j)
        for (int i = 0; i < width; ++i) {
            uv.u(i, j) = i;
            uv.v(i, j) = j;
        }
    return uv;
}

bool TexCoords::monotone() const {
    for (int j = 0; j < height(); ++j)
        for (int i = 0; i < width(); ++i) {
            if (i + 1 < width() && u(i + 1, j) < u(i, j)) return false;
            if (j + 1 < height() && v(i, j + 1) < v(i, j)) return false;
        }
    return true;
}

bool TexCoords::monotone(const Mask& mask) const {
    for (int j = 0; j < height(); ++j)
        for (int i = 0; i < width(); ++i) {
            if (!mask(i, j)) continue;
            if (i + 1 < width() && mask(i + 1, j) && u(i + 1, j) < u(i, j)) return false;
            if (j + 1 < height() && mask(i, j + 1) && v(i, j + 1) < v(i, j)) return false;
        }
    return true;
}

WarpStack::WarpStack(std::vector<GradField> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw InvalidArgument("WarpStack needs at least one level");
    for (std::size_t j = 1; j < levels_.size(); ++j) {
        const auto& fine = levels_[j - 1];
        const auto& coarse = levels_[j];
        if (coarse.height() * 2 != fine.height() || coarse.width() * 2 != fine.width())
            throw InvalidArgument("WarpStack level " + std::to_string(j) +
                                  " does not halve the previous level");
    }
}

WarpStack::WarpStack(int height, int width, int scales) {
    if (scales < 1) throw InvalidArgument("WarpStack needs at least one scale");
    const int div = 1 << (scales - 1);
    if (height % div != 0 || width % div != 0)
        throw InvalidArgument("dimensions " + std::to_string(height) + "x" + std::to_string(width) +
                              " not divisible by 2^" + std::to_string(scales - 1));
    for (int j = 0; j < scales; ++j) levels_.emplace_back(height >> j, width >> j);
}

std::size_t WarpStack::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : levels_) n += l.u.size() + l.v.size();
    return n;
}

std::vector<double> WarpStack::pack() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : levels_) {
        flat.insert(flat.end(), l.u.values().begin(), l.u.values().end());
        flat.insert(flat.end(), l.v.values().begin(), l.v.values().end());
    }
    return flat;
}

void WarpStack::unpack(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw InvalidArgument("WarpStack::unpack size mismatch");
    std::size_t k = 0;
    for (auto& l : levels_) {
        for (double& x : l.u.values()) x = flat[k++];
        for (double& x : l.v.values()) x = flat[k++];
    }
}

std::array<double, 5> pyramid_kernel() {
    constexpr double m = 1.4;
    return {m * 1.0 / 16.0, m * 4.0 / 16.0, m * 6.0 / 16.0, m * 4.0 / 16.0, m * 1.0 / 16.0};
}

ScalarField upsample(const ScalarField& coarse) {
    ScalarField zeros(coarse.height() * 2, coarse.width() * 2);
    for (int j = 0; j < coarse.height(); ++j)
        for (int i = 0; i < coarse.width(); ++i) zeros(2 * i, 2 * j) = coarse(i, j);
    return convolve_axis(convolve_axis(zeros, true), false);
}

ScalarField upsample_adjoint(const ScalarField& fine) {
    if (fine.height() % 2 != 0 || fine.width() % 2 != 0)
        throw InvalidArgument("upsample_adjoint needs even dimensions");
    const ScalarField spread = convolve_axis_adjoint(convolve_axis_adjoint(fine, false), true);
    ScalarField coarse(fine.height() / 2, fine.width() / 2);
    for (int j = 0; j < coarse.height(); ++j)
        for (int i = 0; i < coarse.width(); ++i) coarse(i, j) = spread(2 * i, 2 * j);
    return coarse;
}

GradField synthesize_linear(const WarpStack& stack) {
    const int n = stack.scales();
    GradField acc = stack.level(n - 1);
    for (int j = n - 2; j >= 0; --j) {
        GradField up(upsample(acc.u), upsample(acc.v));
        add_into(up.u, stack.level(j).u);
        add_into(up.v, stack.level(j).v);
        acc = std::move(up);
    }
    return acc;
}

WarpStack synthesize_linear_adjoint(const GradField& grad, int scales) {
    std::vector<GradField> levels;
    levels.reserve(static_cast<std::size_t>(scales));
    levels.push_back(grad);
    for (int j = 1; j < scales; ++j) {
        const GradField& fine = levels.back();
        levels.emplace_back(upsample_adjoint(fine.u), upsample_adjoint(fine.v));
    }
    return WarpStack(std::move(levels));
}

GradField relu(const GradField& pre) {
    GradField out = pre;
    for (double& x : out.u.values()) x = x > 0.0 ? x : 0.0;
    for (double& x : out.v.values()) x = x > 0.0 ? x : 0.0;
    return out;
}

GradField relu_backward(const GradField& pre, const GradField& grad) {
    GradField out = grad;
    for (std::size_t k = 0; k < out.u.size(); ++k) {
        if (!(pre.u.values()[k] > 0.0)) out.u.values()[k] = 0.0;
        if (!(pre.v.values()[k] > 0.0)) out.v.values()[k] = 0.0;
    }
    return out;
}

GradField synthesize(const WarpStack& stack) { return relu(synthesize_linear(stack)); }

WarpStack synthesize_backward(const WarpStack& stack, const GradField& grad) {
    const GradField pre = synthesize_linear(stack);
    return synthesize_linear_adjoint(relu_backward(pre, grad), stack.scales());
}

TexCoords integrate(const GradField& grad) {
    const int h = grad.height();
    const int w = grad.width();
    for (std::size_t k = 0; k < grad.u.size(); ++k)
        if (grad.u.values()[k] < 0.0 || grad.v.values()[k] < 0.0)
            throw InvalidArgument("integrate: increments must be non-negative");
    TexCoords uv(h, w);
    for (int j = 0; j < h; ++j)
        for (int i = 1; i < w; ++i) uv.u(i, j) = uv.u(i - 1, j) + grad.u(i, j);
    for (int j = 1; j < h; ++j)
        for (int i = 0; i < w; ++i) uv.v(i, j) = uv.v(i, j - 1) + grad.v(i, j);
    return uv;
}

GradField integrate_backward(const TexCoords& grad) {
    const int h = grad.height();
    const int w = grad.width();
    GradField out(h, w);
    for (int j = 0; j < h; ++j) {
        double acc = 0.0;
        for (int i = w - 1; i >= 1; --i) {
            acc += grad.u(i, j);
            out.u(i, j) = acc;
        }
    }
    for (int i = 0; i < w; ++i) {
        double acc = 0.0;
        for (int j = h - 1; j >= 1; --j) {
            acc += grad.v(i, j);
            out.v(i, j) = acc;
        }
    }
    return out;
}

GradFieldLoss l1_reg(const GradField& grad) {
    const double n = static_cast<double>(grad.u.size());
    GradFieldLoss out{0.0, GradField(grad.height(), grad.width())};
    for (std::size_t k = 0; k < grad.u.size(); ++k) {
        const double a = grad.u.values()[k];
        const double b = grad.v.values()[k];
        out.value += std::abs(a) + std::abs(b);
        out.grad.u.values()[k] = (a > 0.0 ? 1.0 : a < 0.0 ? -1.0 : 0.0) / n;
        out.grad.v.values()[k] = (b > 0.0 ? 1.0 : b < 0.0 ? -1.0 : 0.0) / n;
    }
    out.value /= n;
    return out;
}

GradFieldLoss integrability_loss(const GradField& grad) {
    const int h = grad.height();
    const int w = grad.width();
    if (h < 2 || w < 2) throw InvalidArgument("integrability_loss needs at least 2x2");
    const double norm = 1.0 / (static_cast<double>(h) * w);
    const auto& vu = grad.u;
    const auto& vv = grad.v;
    GradFieldLoss out{0.0, GradField(h, w)};
    // The stencil's first index runs along rows: the bracket is twice the
    // discrete curl d(V_v)/dx - d(V_u)/dy on each 2x2 cell.
    for (int j = 0; j + 1 < h; ++j) {
        for (int i = 0; i + 1 < w; ++i) {
            const double r = vu(i + 1, j) - vu(i + 1, j + 1) + vu(i, j) - vu(i, j + 1) +
                             vv(i + 1, j) + vv(i + 1, j + 1) - vv(i, j) - vv(i, j + 1);
            out.value += r * r;
            const double g = 2.0 * r * norm;
            out.grad.u(i + 1, j) += g;
            out.grad.u(i + 1, j + 1) -= g;
            out.grad.u(i, j) += g;
            out.grad.u(i, j + 1) -= g;
            out.grad.v(i + 1, j) += g;
            out.grad.v(i + 1, j + 1) += g;
            out.grad.v(i, j) -= g;
            out.grad.v(i, j + 1) -= g;
        }
    }
    out.value *= norm;
    return out;
}

WarpStack init_identity(int height, int width, int scales) {
    WarpStack probe(height, width, scales);
    const int top = scales - 1;
    for (double& x : probe.level(top).u.values()) x = 1.0;
    for (double& x : probe.level(top).v.values()) x = 1.0;
    const GradField response = synthesize_linear(probe);

    // Reflect padding keeps the response constant; take the mean anyway so
    // the calibration does not depend on that.
    double mean = 0.0;
    for (double x : response.u.values()) mean += x;
    mean /= static_cast<double>(response.u.size());

    WarpStack stack(height, width, scales);
    for (double& x : stack.level(top).u.values()) x = 1.0 / mean;
    for (double& x : stack.level(top).v.values()) x = 1.0 / mean;
    return stack;
}

void save_warpstack(const WarpStack& stack, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "warpstack.txt");
    if (!manifest) throw IoError("cannot write " + (dir / "warpstack.txt").string());
    manifest << "scales " << stack.scales() << "\n";
    for (int j = 0; j < stack.scales(); ++j) {
        const GradField& l = stack.level(j);
        manifest << "level " << j << " " << l.height() << " " << l.width() << "\n";
        ImageField packed(l.height(), l.width(), 3);
        for (int y = 0; y < l.height(); ++y)
            for (int x = 0; x < l.width(); ++x) {
                packed(x, y, 0) = l.u(x, y);
                packed(x, y, 1) = l.v(x, y);
            }
        write_pfm(packed, dir / ("level_" + std::to_string(j) + ".pfm"));
    }
    if (!manifest) throw IoError("write failure on warpstack manifest");
}

WarpStack load_warpstack(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "warpstack.txt");
    if (!manifest) throw IoError("cannot open " + (dir / "warpstack.txt").string());
    std::string key;
    int scales = 0;
    if (!(manifest >> key >> scales) || key != "scales" || scales < 1)
        throw FormatError("warpstack manifest: bad scale count");
    std::vector<GradField> levels;
    for (int j = 0; j < scales; ++j) {
        int index = 0, h = 0, w = 0;
        if (!(manifest >> key >> index >> h >> w) || key != "level" || index != j)
            throw FormatError("warpstack manifest: bad level line " + std::to_string(j));
        const ImageField packed = read_pfm(dir / ("level_" + std::to_string(j) + ".pfm"));
        if (packed.height() != h || packed.width() != w || packed.channels() != 3)
            throw FormatError("warpstack level " + std::to_string(j) + " disagrees with manifest");
        levels.emplace_back(packed.channel(0), packed.channel(1));
    }
    return WarpStack(std::move(levels));
}

void write_texcoords(const TexCoords& uv, const std::filesystem::path& path) {
    ImageField packed(uv.height(), uv.width(), 3);
    for (int j = 0; j < uv.height(); ++j)
        for (int i = 0; i < uv.width(); ++i) {
            packed(i, j, 0) = uv.u(i, j);
            packed(i, j, 1) = uv.v(i, j);
        }
    write_pfm(packed, path);
}

TexCoords read_texcoords(const std::filesystem::path& path) {
    const ImageField packed = read_pfm(path);
    if (packed.channels() != 3) throw FormatError("texcoords file must be a 3-channel PFM");
    return TexCoords(packed.channel(0), packed.channel(1));
}

}  // namespace svt
