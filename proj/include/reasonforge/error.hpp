#pragma once

#include <stdexcept>
#include <string>

namespace reasonforge {

enum class ErrorKind {
    Domain,        // geometric / range precondition violated
    Parse,         // malformed input file or wire payload
    Execution,     // tool backend failed or returned an invalid output
    Policy,        // policy could not produce a step
    Synthesis,     // generator failed for one chain
    Config,        // invalid configuration
    Io,            // filesystem / process / network failure
    Precondition,  // operation called on invalid input
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    static Error domain(const std::string& msg) { return {ErrorKind::Domain, "domain error: " + msg}; }
    static Error parse(const std::string& msg) { return {ErrorKind::Parse, "parse error: " + msg}; }
    static Error execution(const std::string& msg) { return {ErrorKind::Execution, msg}; }
    static Error policy(const std::string& msg) { return {ErrorKind::Policy, "policy error: " + msg}; }
    static Error synthesis(const std::string& msg) { return {ErrorKind::Synthesis, "synthesis error: " + msg}; }
    static Error config(const std::string& msg) { return {ErrorKind::Config, "config error: " + msg}; }
    static Error io(const std::string& msg) { return {ErrorKind::Io, "io error: " + msg}; }
    static Error precondition(const std::string& msg) { return {ErrorKind::Precondition, "precondition: " + msg}; }

private:
    ErrorKind kind_;
};

}  // namespace reasonforge
