#include "reasonforge/wire.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "httplib.h"
#include "reasonforge/error.hpp"
#include "reasonforge/text.hpp"

extern char** environ;

namespace reasonforge {

namespace {

class HttpTransport final : public Transport {
public:
    HttpTransport(std::string endpoint, const TransportOptions& options)
        : endpoint_(std::move(endpoint)), limiter_(options.max_in_flight) {
        // split "http://host:port/prefix" into base and path prefix
        const std::size_t scheme = endpoint_.find("://");
        const std::size_t slash = endpoint_.find('/', scheme + 3);
        base_ = slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
        prefix_ = slash == std::string::npos ? "" : endpoint_.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        timeout_ms_ = options.timeout_ms;
    }

    Json call(const std::string& route, const Json& body) override {
        limiter_.acquire();
        struct Release {
            InFlightLimiter& l;
            ~Release() { l.release(); }
        } release{limiter_};

        httplib::Client client(base_);
        const auto t = std::chrono::milliseconds(timeout_ms_);
        client.set_connection_timeout(t);
        client.set_read_timeout(t);
        client.set_write_timeout(t);
        auto res = client.Post(prefix_ + route, body.dump(), "application/json");
        if (!res) {
            throw Error::io(endpoint_ + route + ": " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw Error::io(endpoint_ + route + ": HTTP " + std::to_string(res->status));
        }
        try {
            return Json::parse(res->body);
        } catch (const Json::parse_error& e) {
            throw Error::io(endpoint_ + route + ": reply is not JSON");
        }
    }

    const std::string& endpoint() const override { return endpoint_; }

private:
    std::string endpoint_;
    std::string base_;
    std::string prefix_;
    int timeout_ms_ = 30000;
    InFlightLimiter limiter_;
};

/// One long-lived child process; requests are serialized.
class SubprocessTransport final : public Transport {
public:
    SubprocessTransport(std::string endpoint, const TransportOptions& options)
        : endpoint_(std::move(endpoint)), command_(endpoint_.substr(5)), timeout_ms_(options.timeout_ms) {}

    ~SubprocessTransport() override { shutdown(); }

    Json call(const std::string&, const Json& body) override {
        std::lock_guard lock(mu_);
        if (pid_ <= 0) start();
        const std::string line = body.dump() + "\n";
        std::size_t off = 0;
        while (off < line.size()) {
            const ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                const std::string why = std::strerror(errno);
                shutdown();
                throw Error::io(endpoint_ + ": write failed: " + why);
            }
            off += static_cast<std::size_t>(n);
        }
        const std::string reply = read_line();
        try {
            return Json::parse(reply);
        } catch (const Json::parse_error&) {
            throw Error::io(endpoint_ + ": reply is not JSON");
        }
    }

    const std::string& endpoint() const override { return endpoint_; }

private:
    void start() {
        ::signal(SIGPIPE, SIG_IGN);
        int in_pipe[2], out_pipe[2];
        if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) throw Error::io(endpoint_ + ": pipe failed");
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
        posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
        posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
        std::string shell = "/bin/sh", flag = "-c";
        char* argv[] = {shell.data(), flag.data(), command_.data(), nullptr};
        const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        if (rc != 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            pid_ = -1;
            throw Error::io(endpoint_ + ": spawn failed: " + std::strerror(rc));
        }
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        buffer_.clear();
    }

    std::string read_line() {
        for (;;) {
            const std::size_t nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            pollfd pfd{from_child_, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, timeout_ms_);
            if (ready == 0) {
                shutdown();
                throw Error::io(endpoint_ + ": timed out waiting for reply");
            }
            if (ready < 0) {
                if (errno == EINTR) continue;
                shutdown();
                throw Error::io(endpoint_ + ": poll failed");
            }
            char chunk[4096];
            const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) continue;
                shutdown();
                throw Error::io(endpoint_ + ": backend closed the stream");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void shutdown() {
        if (to_child_ >= 0) ::close(to_child_);
        if (from_child_ >= 0) ::close(from_child_);
        to_child_ = from_child_ = -1;
        if (pid_ > 0) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == 0) {
                ::kill(pid_, SIGTERM);
                ::waitpid(pid_, &status, 0);
            }
        }
        pid_ = -1;
    }

    std::string endpoint_;
    std::string command_;
    int timeout_ms_;
    std::mutex mu_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

}  // namespace

bool is_remote_endpoint(const std::string& endpoint) {
    return text::starts_with(endpoint, "http://") || text::starts_with(endpoint, "exec:");
}

std::shared_ptr<Transport> connect(const std::string& endpoint, const TransportOptions& options) {
    if (text::starts_with(endpoint, "http://")) return std::make_shared<HttpTransport>(endpoint, options);
    if (text::starts_with(endpoint, "exec:") && endpoint.size() > 5) {
        return std::make_shared<SubprocessTransport>(endpoint, options);
    }
    throw Error::config("unsupported endpoint '" + endpoint + "' (expected http://... or exec:...)");
}

std::shared_ptr<Transport> TransportPool::get(const std::string& endpoint) {
    std::lock_guard lock(mu_);
    auto& slot = transports_[endpoint];
    if (!slot) slot = connect(endpoint, options_);
    return slot;
}

}  // namespace reasonforge
