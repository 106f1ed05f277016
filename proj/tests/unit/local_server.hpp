#pragma once

#include <functional>
#include <string>
#include <thread>

#include "httplib.h"
#include "reasonforge/scene.hpp"

namespace fixtures {

/// In-process HTTP server answering POSTs on one or more routes. Stops on
/// destruction.
class LocalServer {
public:
    using Handler = std::function<reasonforge::Json(const std::string& route, const reasonforge::Json& body)>;

    explicit LocalServer(Handler handler) : handler_(std::move(handler)) {
        server_.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            try {
                res.set_content(handler_(req.path, reasonforge::Json::parse(req.body)).dump(), "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(e.what(), "text/plain");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> requests{0};

private:
    Handler handler_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

/// An endpoint on which nothing listens.
inline std::string dead_endpoint() {
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    return "http://127.0.0.1:" + std::to_string(port);
}

}  // namespace fixtures
