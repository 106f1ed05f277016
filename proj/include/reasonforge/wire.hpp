#pragma once

// Transports for remote model backends. Two bindings carry identical JSON
// payloads:
//   http://host:port[/prefix]   POST {prefix}{route} with a JSON body
//   exec:<command line>          newline-delimited JSON over the child's stdio
//                                (the route is implied by the child's role)

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "reasonforge/scene.hpp"

namespace reasonforge {

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws Error(Io) on connection failure, timeout or a non-JSON reply.
    virtual Json call(const std::string& route, const Json& body) = 0;
    virtual const std::string& endpoint() const = 0;
};

/// Counting slot limiter for in-flight requests.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int max_in_flight) : available_(max_in_flight < 1 ? 1 : max_in_flight) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct TransportOptions {
    int max_in_flight = 1;
    int timeout_ms = 30000;
};

/// Creates a transport for an endpoint string. Throws Error(Config) for an
/// unrecognized scheme.
std::shared_ptr<Transport> connect(const std::string& endpoint, const TransportOptions& options = {});

bool is_remote_endpoint(const std::string& endpoint);

/// Shares one transport (and so one in-flight limit) per endpoint string.
class TransportPool {
public:
    explicit TransportPool(TransportOptions options = {}) : options_(options) {}
    std::shared_ptr<Transport> get(const std::string& endpoint);

private:
    TransportOptions options_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<Transport>> transports_;
};

}  // namespace reasonforge
