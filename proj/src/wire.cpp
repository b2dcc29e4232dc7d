#include "svt/wire.hpp"

#include <bit>
#include <cstring>

namespace svt::wire {

namespace {

template <typename T>
void put_le(std::uint8_t* out, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k) out[k] = static_cast<std::uint8_t>(value >> (8 * k));
}

template <typename T>
T get_le(const std::uint8_t* in) {
    T value = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) value |= static_cast<T>(in[k]) << (8 * k);
    return value;
}

void append_f32(std::vector<std::uint8_t>& out, double value) {
    std::uint8_t bytes[4];
    put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
    out.insert(out.end(), bytes, bytes + 4);
}

}  // namespace

std::array<std::uint8_t, kHeaderSize> encode_header(const Header& header) {
    std::array<std::uint8_t, kHeaderSize> out{};
    std::memcpy(out.data(), kMagic.data(), 4);
    out[4] = static_cast<std::uint8_t>(header.type);
    put_le<std::uint32_t>(&out[5], header.width);
    put_le<std::uint32_t>(&out[9], header.height);
    put_le<std::uint32_t>(&out[13], header.channels);
    put_le<std::uint64_t>(&out[17], header.step);
    put_le<std::uint64_t>(&out[25], header.seed);
    return out;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) throw ProtocolError("frame header truncated");
    if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) throw ProtocolError("bad frame magic");
    const std::uint8_t type = bytes[4];
    if (type < 1 || type > 4) throw ProtocolError("unknown message type " + std::to_string(type));
    Header h;
    h.type = static_cast<MessageType>(type);
    h.width = get_le<std::uint32_t>(&bytes[5]);
    h.height = get_le<std::uint32_t>(&bytes[9]);
    h.channels = get_le<std::uint32_t>(&bytes[13]);
    h.step = get_le<std::uint64_t>(&bytes[17]);
    h.seed = get_le<std::uint64_t>(&bytes[25]);
    return h;
}

std::vector<std::uint8_t> encode_request(const Header& header, std::span<const double> values) {
    if (values.size() != header.element_count())
        throw ProtocolError("request payload does not match header dimensions");
    const auto head = encode_header(header);
    std::vector<std::uint8_t> out(head.begin(), head.end());
    out.reserve(kHeaderSize + 4 * values.size());
    for (double v : values) append_f32(out, v);
    return out;
}

std::vector<std::uint8_t> encode_response(const Header& header, std::span<const double> cotangent,
                                          double diagnostic_loss) {
    Header h = header;
    h.type = MessageType::grad_response;
    auto out = encode_request(h, cotangent);
    append_f32(out, diagnostic_loss);
    return out;
}

std::vector<std::uint8_t> encode_shutdown() {
    Header h;
    h.type = MessageType::shutdown;
    const auto head = encode_header(h);
    return {head.begin(), head.end()};
}

std::vector<std::uint8_t> encode_error(const std::string& message) {
    Header h;
    h.type = MessageType::error;
    const auto head = encode_header(h);
    std::vector<std::uint8_t> out(head.begin(), head.end());
    std::uint8_t len[4];
    put_le<std::uint32_t>(len, static_cast<std::uint32_t>(message.size()));
    out.insert(out.end(), len, len + 4);
    out.insert(out.end(), message.begin(), message.end());
    return out;
}

std::vector<double> decode_f32(std::span<const std::uint8_t> bytes, std::size_t count) {
    if (bytes.size() < 4 * count) throw ProtocolError("f32 payload truncated");
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = std::bit_cast<float>(get_le<std::uint32_t>(&bytes[4 * k]));
    return out;
}

std::uint32_t decode_u32(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw ProtocolError("u32 truncated");
    return get_le<std::uint32_t>(bytes.data());
}

}  // namespace svt::wire
