#pragma once

// Binary guidance protocol spoken over a child process's stdin/stdout.
//
// Every frame starts with a 33-byte little-endian header:
//   magic "SVTG" | type u8 | width u32 | height u32 | channels u32 | step u64 | seed u64
// followed by a type-specific payload:
//   grad_request   f32[w*h*c]                 (row-major, channel-interleaved)
//   grad_response  f32[w*h*c] + f32 diagnostic_loss
//   shutdown       (empty)
//   error          u32 byte length + UTF-8 message

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svt/error.hpp"

namespace svt::wire {

inline constexpr std::array<char, 4> kMagic{'S', 'V', 'T', 'G'};
inline constexpr std::size_t kHeaderSize = 33;

enum class MessageType : std::uint8_t {
    grad_request = 1,
    grad_response = 2,
    shutdown = 3,
    error = 4,
};

struct Header {
    MessageType type = MessageType::grad_request;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;

    std::size_t element_count() const {
        return static_cast<std::size_t>(width) * height * channels;
    }
};

/// Malformed frame: bad magic, unknown type or inconsistent length.
class ProtocolError : public Error {
public:
    using Error::Error;
};

std::array<std::uint8_t, kHeaderSize> encode_header(const Header& header);
/// Throws ProtocolError on bad magic or unknown message type.
Header decode_header(std::span<const std::uint8_t> bytes);

/// Header followed by the values narrowed to f32.
std::vector<std::uint8_t> encode_request(const Header& header, std::span<const double> values);
/// Header, cotangent narrowed to f32, then the diagnostic loss.
std::vector<std::uint8_t> encode_response(const Header& header, std::span<const double> cotangent,
                                          double diagnostic_loss);
std::vector<std::uint8_t> encode_shutdown();
std::vector<std::uint8_t> encode_error(const std::string& message);

/// Decodes `count` little-endian f32 values (widened to f64).
std::vector<double> decode_f32(std::span<const std::uint8_t> bytes, std::size_t count);
std::uint32_t decode_u32(std::span<const std::uint8_t> bytes);

}  // namespace svt::wire
