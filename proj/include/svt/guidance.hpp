#pragma once

// Image-prior guidance: maps a blended image to the gradient of a
// plausibility loss with respect to that image.

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <sys/types.h>

#include "svt/error.hpp"
#include "svt/grid.hpp"

namespace svt {

struct GuidanceRequest {
    ImageField image;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
};

struct GuidanceResponse {
    ImageField cotangent;
    double diagnostic_loss = -1.0;  ///< -1 when the guidance cannot report one
};

class GuidanceError : public Error {
public:
    enum class Kind { protocol, child_exit, timeout, nan_payload, remote_error, spawn };

    GuidanceError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

const char* to_string(GuidanceError::Kind kind);

class Guidance {
public:
    virtual ~Guidance() = default;
    virtual GuidanceResponse gradient(const GuidanceRequest& request) = 0;
};

/// Pulls the image toward a fixed target: cotangent = image - target (the
/// gradient of 0.5 * sum of squares), diagnostic loss 0.5 * mean of squares.
class OracleGuidance : public Guidance {
public:
    explicit OracleGuidance(ImageField target);
    GuidanceResponse gradient(const GuidanceRequest& request) override;
    const ImageField& target() const { return target_; }

private:
    ImageField target_;
};

/// Oracle plus sigma * N(0, 1) noise drawn from a counter-based stream keyed
/// by (seed, step, element); equal (seed, step) reproduce the same noise.
class NoisyOracleGuidance : public Guidance {
public:
    NoisyOracleGuidance(ImageField target, double sigma);
    GuidanceResponse gradient(const GuidanceRequest& request) override;

private:
    OracleGuidance oracle_;
    double sigma_;
};

/// Standard normal deviate for element `index` of the stream (seed, step).
double counter_normal(std::uint64_t seed, std::uint64_t step, std::uint64_t index);

/// Child process speaking the wire protocol on stdin/stdout. One request in
/// flight; not thread-safe. After a transport failure every further call
/// rethrows the same error kind.
class RemoteGuidance : public Guidance {
public:
    static constexpr std::chrono::milliseconds kDefaultTimeout{120'000};

    /// Spawns `/bin/sh -c command`.
    explicit RemoteGuidance(const std::string& command,
                            std::chrono::milliseconds timeout = kDefaultTimeout);
    ~RemoteGuidance() override;
    RemoteGuidance(const RemoteGuidance&) = delete;
    RemoteGuidance& operator=(const RemoteGuidance&) = delete;

    GuidanceResponse gradient(const GuidanceRequest& request) override;

    /// Sends a shutdown frame and waits up to 5 s for the child to exit
    /// before killing it. Returns true if it exited on its own.
    bool shutdown();

private:
    [[noreturn]] void fail(GuidanceError::Kind kind, const std::string& what);
    void write_all(const std::vector<std::uint8_t>& bytes);
    void read_exact(std::uint8_t* out, std::size_t n,
                    std::chrono::steady_clock::time_point deadline);
    void reap(bool force);

    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::chrono::milliseconds timeout_;
    bool broken_ = false;
    GuidanceError::Kind broken_kind_ = GuidanceError::Kind::protocol;
};

/// Builds a guidance from a spec string: "oracle", "noisy-oracle[:sigma]"
/// or "remote:<command>". The oracle variants use `target`.
std::unique_ptr<Guidance> make_guidance(const std::string& spec, const ImageField& target);

}  // namespace svt
