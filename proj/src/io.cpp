#include "svt/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace svt {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    return bytes;
}

void spit(const std::filesystem::path& path, const std::string& header,
          const std::vector<unsigned char>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

// Header tokenizer shared by PFM and PNM. PNM allows '#' comments.
class HeaderReader {
public:
    HeaderReader(const std::vector<unsigned char>& bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    std::string token(bool allow_comments) {
        skip_space(allow_comments);
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out += static_cast<char>(bytes_[pos_++]);
        if (out.empty()) throw FormatError(context_ + ": truncated header");
        return out;
    }

    long integer(bool allow_comments) {
        const std::string t = token(allow_comments);
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(t, &used);
        } catch (const std::exception&) {
            throw FormatError(context_ + ": expected integer, got '" + t + "'");
        }
        if (used != t.size()) throw FormatError(context_ + ": expected integer, got '" + t + "'");
        return v;
    }

    double real() {
        const std::string t = token(false);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            throw FormatError(context_ + ": expected number, got '" + t + "'");
        }
        if (used != t.size()) throw FormatError(context_ + ": expected number, got '" + t + "'");
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t payload_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw FormatError(context_ + ": missing separator before payload");
        return pos_ + 1;
    }

private:
    void skip_space(bool allow_comments) {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (allow_comments && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

std::uint32_t load_u32(const unsigned char* p, bool little_endian) {
    if (little_endian)
        return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
               std::uint32_t(p[3]) << 24;
    return std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 |
           std::uint32_t(p[0]) << 24;
}

void store_u32_le(unsigned char* p, std::uint32_t v) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
    p[2] = static_cast<unsigned char>(v >> 16);
    p[3] = static_cast<unsigned char>(v >> 24);
}

void write_pfm_raw(int height, int width, int channels, std::span<const double> values,
                   const std::filesystem::path& path) {
    if (!all_finite(values)) throw InvalidArgument("write_pfm: field contains non-finite values");
    const std::string header = std::string(channels == 1 ? "Pf" : "PF") + "\n" +
                               std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
    std::vector<unsigned char> payload(values.size() * 4);
    const std::size_t row = static_cast<std::size_t>(width) * channels;
    std::size_t out = 0;
    for (int j = height - 1; j >= 0; --j) {
        for (std::size_t k = 0; k < row; ++k) {
            const float f = static_cast<float>(values[static_cast<std::size_t>(j) * row + k]);
            store_u32_le(&payload[out], std::bit_cast<std::uint32_t>(f));
            out += 4;
        }
    }
    spit(path, header, payload);
}

}  // namespace

ImageField read_pfm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const std::string ctx = "read_pfm(" + path.string() + ")";
    HeaderReader header(bytes, ctx);
    const std::string magic = header.token(false);
    int channels = 0;
    if (magic == "Pf")
        channels = 1;
    else if (magic == "PF")
        channels = 3;
    else
        throw FormatError(ctx + ": bad magic '" + magic + "'");
    const long width = header.integer(false);
    const long height = header.integer(false);
    if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20))
        throw FormatError(ctx + ": invalid dimensions");
    const double scale = header.real();
    if (scale == 0.0 || !std::isfinite(scale)) throw FormatError(ctx + ": scale must be nonzero");
    const bool little_endian = scale < 0.0;
    const std::size_t offset = header.payload_offset();

    const std::size_t row = static_cast<std::size_t>(width) * channels;
    const std::size_t count = row * static_cast<std::size_t>(height);
    if (bytes.size() < offset + count * 4) throw FormatError(ctx + ": truncated payload");

    std::vector<double> data(count);
    const unsigned char* p = bytes.data() + offset;
    for (long j = height - 1; j >= 0; --j) {
        for (std::size_t k = 0; k < row; ++k, p += 4) {
            const float f = std::bit_cast<float>(load_u32(p, little_endian));
            if (std::isnan(f)) throw FormatError(ctx + ": NaN in payload");
            data[static_cast<std::size_t>(j) * row + k] = f;
        }
    }
    return ImageField(static_cast<int>(height), static_cast<int>(width), channels, std::move(data));
}

ScalarField read_pfm_scalar(const std::filesystem::path& path) {
    ImageField image = read_pfm(path);
    if (image.channels() != 1)
        throw FormatError("read_pfm_scalar(" + path.string() + "): expected single-channel Pf");
    return image.channel(0);
}

void write_pfm(const ScalarField& field, const std::filesystem::path& path) {
    write_pfm_raw(field.height(), field.width(), 1, field.values(), path);
}

void write_pfm(const ImageField& image, const std::filesystem::path& path) {
    write_pfm_raw(image.height(), image.width(), image.channels(), image.values(), path);
}

ImageField read_pnm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const std::string ctx = "read_pnm(" + path.string() + ")";
    HeaderReader header(bytes, ctx);
    const std::string magic = header.token(true);
    int channels = 0;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw FormatError(ctx + ": unsupported magic '" + magic + "'");
    const long width = header.integer(true);
    const long height = header.integer(true);
    const long maxval = header.integer(true);
    if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20))
        throw FormatError(ctx + ": invalid dimensions");
    if (maxval <= 0 || maxval > 65535) throw FormatError(ctx + ": invalid maxval");
    const std::size_t offset = header.payload_offset();

    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    if (bytes.size() < offset + count * bytes_per) throw FormatError(ctx + ": truncated payload");

    std::vector<double> data(count);
    const unsigned char* p = bytes.data() + offset;
    const double inv = 1.0 / static_cast<double>(maxval);
    for (std::size_t k = 0; k < count; ++k) {
        // 16-bit PNM samples are big-endian.
        const unsigned level = bytes_per == 2 ? (unsigned(p[2 * k]) << 8 | p[2 * k + 1]) : p[k];
        if (level > static_cast<unsigned>(maxval)) throw FormatError(ctx + ": sample exceeds maxval");
        data[k] = static_cast<double>(level) * inv;
    }
    return ImageField(static_cast<int>(height), static_cast<int>(width), channels, std::move(data));
}

Mask read_mask(const std::filesystem::path& path) {
    const ImageField image = read_pnm(path);
    return Mask::threshold(image.channel(0));
}

void write_pnm(const ImageField& image, const std::filesystem::path& path) {
    if (!all_finite(image.values())) throw InvalidArgument("write_pnm: image contains non-finite values");
    const std::string header = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(image.width()) + " " +
                               std::to_string(image.height()) + "\n255\n";
    std::vector<unsigned char> payload(image.size());
    const auto values = image.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double v = std::clamp(values[k], 0.0, 1.0);
        // nearbyint honours the default round-half-to-even mode.
        payload[k] = static_cast<unsigned char>(std::nearbyint(v * 255.0));
    }
    spit(path, header, payload);
}

void write_pnm(const ScalarField& field, const std::filesystem::path& path) {
    write_pnm(ImageField::from_scalar(field), path);
}

}  // namespace svt
