// Minimal guidance server for tests: answers grad_request frames on stdin.
//
//   svt_guidance_stub MODE [--target FILE.pfm]
//
// MODE: zero | echo-minus-half | oracle | bad-magic | nan | die | hang | error

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "svt/io.hpp"
#include "svt/wire.hpp"

namespace {

bool read_exact(std::uint8_t* out, std::size_t n) {
    return std::fread(out, 1, n, stdin) == n;
}

void send(const std::vector<std::uint8_t>& bytes) {
    std::fwrite(bytes.data(), 1, bytes.size(), stdout);
    std::fflush(stdout);
}

int usage() {
    std::fprintf(stderr, "usage: svt_guidance_stub MODE [--target FILE.pfm]\n");
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage();
    const std::string mode = argv[1];
    svt::ImageField target;
    if (mode == "oracle") {
        if (argc < 4 || std::strcmp(argv[2], "--target") != 0) return usage();
        try {
            target = svt::read_pfm(argv[3]);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "stub: %s\n", e.what());
            return 3;
        }
    }

    std::vector<std::uint8_t> header(svt::wire::kHeaderSize);
    while (read_exact(header.data(), header.size())) {
        svt::wire::Header h;
        try {
            h = svt::wire::decode_header(header);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "stub: %s\n", e.what());
            return 2;
        }
        if (h.type == svt::wire::MessageType::shutdown) return 0;
        if (h.type != svt::wire::MessageType::grad_request) {
            std::fprintf(stderr, "stub: unexpected message type\n");
            return 2;
        }
        std::vector<std::uint8_t> payload(h.element_count() * 4);
        if (!read_exact(payload.data(), payload.size())) return 2;
        const std::vector<double> image = svt::wire::decode_f32(payload, h.element_count());

        std::vector<double> cot(image.size(), 0.0);
        double loss = 0.0;
        if (mode == "zero") {
        } else if (mode == "echo-minus-half") {
            for (std::size_t k = 0; k < cot.size(); ++k) cot[k] = image[k] - 0.5;
        } else if (mode == "oracle") {
            if (target.size() != image.size()) {
                send(svt::wire::encode_error("target size does not match request"));
                continue;
            }
            for (std::size_t k = 0; k < cot.size(); ++k) {
                cot[k] = image[k] - target.values()[k];
                loss += cot[k] * cot[k];
            }
            loss = 0.5 * loss / static_cast<double>(cot.size());
        } else if (mode == "bad-magic") {
            std::vector<std::uint8_t> bytes = svt::wire::encode_response(h, cot, 0.0);
            bytes[0] = 'X';
            send(bytes);
            continue;
        } else if (mode == "nan") {
            cot.assign(cot.size(), std::numeric_limits<double>::quiet_NaN());
        } else if (mode == "die") {
            return 3;
        } else if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
            return 0;
        } else if (mode == "error") {
            send(svt::wire::encode_error("stub refuses the request"));
            continue;
        } else {
            return usage();
        }
        h.type = svt::wire::MessageType::grad_response;
        send(svt::wire::encode_response(h, cot, loss));
    }
    return 0;
}
