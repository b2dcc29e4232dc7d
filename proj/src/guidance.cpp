#include "svt/guidance.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <numbers>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "svt/wire.hpp"

namespace svt {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Open interval (0, 1) from the top 53 bits.
double unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void check_request(const ImageField& target, const GuidanceRequest& request) {
    if (!target.same_shape(request.image))
        throw InvalidArgument("guidance: request dimensions differ from the target");
}

}  // namespace

const char* to_string(GuidanceError::Kind kind) {
    switch (kind) {
        case GuidanceError::Kind::protocol: return "protocol";
        case GuidanceError::Kind::child_exit: return "child-exit";
        case GuidanceError::Kind::timeout: return "timeout";
        case GuidanceError::Kind::nan_payload: return "nan-payload";
        case GuidanceError::Kind::remote_error: return "remote-error";
        case GuidanceError::Kind::spawn: return "spawn";
    }
    return "unknown";
}

OracleGuidance::OracleGuidance(ImageField target) : target_(std::move(target)) {}

GuidanceResponse OracleGuidance::gradient(const GuidanceRequest& request) {
    check_request(target_, request);
    GuidanceResponse out{request.image, 0.0};
    auto g = out.cotangent.values();
    const auto t = target_.values();
    double ss = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] -= t[k];
        ss += g[k] * g[k];
    }
    out.diagnostic_loss = 0.5 * ss / static_cast<double>(g.size());
    return out;
}

NoisyOracleGuidance::NoisyOracleGuidance(ImageField target, double sigma)
    : oracle_(std::move(target)), sigma_(sigma) {
    if (!(sigma >= 0.0)) throw InvalidArgument("noisy oracle: sigma must be >= 0");
}

GuidanceResponse NoisyOracleGuidance::gradient(const GuidanceRequest& request) {
    GuidanceResponse out = oracle_.gradient(request);
    if (sigma_ == 0.0) return out;
    auto g = out.cotangent.values();
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] += sigma_ * counter_normal(request.seed, request.step, k);
    return out;
}

double counter_normal(std::uint64_t seed, std::uint64_t step, std::uint64_t index) {
    const std::uint64_t key = splitmix(splitmix(seed) ^ step);
    const double u1 = unit_open(splitmix(key ^ (2 * index)));
    const double u2 = unit_open(splitmix(key ^ (2 * index + 1)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RemoteGuidance::RemoteGuidance(const std::string& command, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    // A dead child must surface as EPIPE, not kill this process.
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0)
        throw GuidanceError(GuidanceError::Kind::spawn, std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw GuidanceError(GuidanceError::Kind::spawn, std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = fork();
    if (pid_ < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw GuidanceError(GuidanceError::Kind::spawn, std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
        // Own process group, so a kill also reaches whatever the shell runs.
        setpgid(0, 0);
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid_, pid_);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

RemoteGuidance::~RemoteGuidance() {
    if (pid_ > 0) {
        if (broken_)
            reap(true);
        else
            shutdown();
    }
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
}

void RemoteGuidance::fail(GuidanceError::Kind kind, const std::string& what) {
    broken_ = true;
    broken_kind_ = kind;
    // Never leave a half-read response behind: the child is done for.
    reap(kind != GuidanceError::Kind::child_exit);
    throw GuidanceError(kind, "remote guidance: " + what);
}

void RemoteGuidance::reap(bool force) {
    if (pid_ <= 0) return;
    if (force) ::kill(-pid_, SIGKILL);
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
        if (std::chrono::steady_clock::now() > deadline) {
            ::kill(-pid_, SIGKILL);
            waitpid(pid_, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
}

void RemoteGuidance::write_all(const std::vector<std::uint8_t>& bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(to_child_, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(GuidanceError::Kind::child_exit, std::string("write failed: ") + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

void RemoteGuidance::read_exact(std::uint8_t* out, std::size_t n,
                                std::chrono::steady_clock::time_point deadline) {
    std::size_t done = 0;
    while (done < n) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) fail(GuidanceError::Kind::timeout, "no response before the deadline");
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            fail(GuidanceError::Kind::child_exit, std::string("poll failed: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        const ssize_t got = ::read(from_child_, out + done, n - done);
        if (got < 0) {
            if (errno == EINTR) continue;
            fail(GuidanceError::Kind::child_exit, std::string("read failed: ") + std::strerror(errno));
        }
        if (got == 0) fail(GuidanceError::Kind::child_exit, "child closed its output");
        done += static_cast<std::size_t>(got);
    }
}

GuidanceResponse RemoteGuidance::gradient(const GuidanceRequest& request) {
    if (broken_) throw GuidanceError(broken_kind_, "remote guidance: endpoint previously failed");
    const ImageField& image = request.image;
    wire::Header header;
    header.type = wire::MessageType::grad_request;
    header.width = static_cast<std::uint32_t>(image.width());
    header.height = static_cast<std::uint32_t>(image.height());
    header.channels = static_cast<std::uint32_t>(image.channels());
    header.step = request.step;
    header.seed = request.seed;
    write_all(wire::encode_request(header, image.values()));

    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::array<std::uint8_t, wire::kHeaderSize> head{};
    read_exact(head.data(), head.size(), deadline);
    wire::Header reply;
    try {
        reply = wire::decode_header(head);
    } catch (const wire::ProtocolError& e) {
        fail(GuidanceError::Kind::protocol, e.what());
    }
    if (reply.type == wire::MessageType::error) {
        std::uint8_t len_bytes[4];
        read_exact(len_bytes, 4, deadline);
        const std::uint32_t len = wire::decode_u32(len_bytes);
        if (len > (1u << 20)) fail(GuidanceError::Kind::protocol, "oversized error message");
        std::string message(len, '\0');
        read_exact(reinterpret_cast<std::uint8_t*>(message.data()), len, deadline);
        // The child is still healthy after reporting an error.
        throw GuidanceError(GuidanceError::Kind::remote_error, "remote guidance reported: " + message);
    }
    if (reply.type != wire::MessageType::grad_response)
        fail(GuidanceError::Kind::protocol, "expected grad_response frame");
    if (reply.width != header.width || reply.height != header.height ||
        reply.channels != header.channels)
        fail(GuidanceError::Kind::protocol, "response dimensions differ from the request");

    const std::size_t count = header.element_count();
    std::vector<std::uint8_t> payload(4 * count + 4);
    read_exact(payload.data(), payload.size(), deadline);
    std::vector<double> values = wire::decode_f32(payload, count + 1);
    const double loss = values.back();
    values.pop_back();
    if (!all_finite(values)) fail(GuidanceError::Kind::nan_payload, "non-finite cotangent");

    return {ImageField(image.height(), image.width(), image.channels(), std::move(values)),
            std::isfinite(loss) ? loss : -1.0};
}

bool RemoteGuidance::shutdown() {
    if (pid_ <= 0) return false;
    const auto frame = wire::encode_shutdown();
    std::size_t done = 0;
    while (done < frame.size()) {
        const ssize_t n = ::write(to_child_, frame.data() + done, frame.size() - done);
        if (n <= 0) break;
        done += static_cast<std::size_t>(n);
    }
    ::close(to_child_);
    to_child_ = -1;
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
        if (std::chrono::steady_clock::now() > deadline) {
            ::kill(-pid_, SIGKILL);
            waitpid(pid_, &status, 0);
            pid_ = -1;
            return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    pid_ = -1;
    return true;
}

std::unique_ptr<Guidance> make_guidance(const std::string& spec, const ImageField& target) {
    if (spec == "oracle") return std::make_unique<OracleGuidance>(target);
    if (spec.rfind("noisy-oracle", 0) == 0) {
        double sigma = 0.1;
        if (spec.size() > 12) {
            if (spec[12] != ':') throw InvalidArgument("bad guidance spec '" + spec + "'");
            sigma = std::stod(spec.substr(13));
        }
        return std::make_unique<NoisyOracleGuidance>(target, sigma);
    }
    if (spec.rfind("remote:", 0) == 0) {
        const std::string command = spec.substr(7);
        if (command.empty()) throw InvalidArgument("remote guidance needs a command");
        return std::make_unique<RemoteGuidance>(command);
    }
    throw InvalidArgument("unknown guidance '" + spec + "' (oracle, noisy-oracle[:sigma], remote:<cmd>)");
}

}  // namespace svt
