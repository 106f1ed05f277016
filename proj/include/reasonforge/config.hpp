#pragma once

// Operator configuration. File format is a TOML subset:
//
//   # comment
//   [synthesis]
//   seed = 42
//   max_chain_len = 4
//   delta = 0.05
//   min_confidence = 0.5
//   [reasoner]
//   max_steps = 8
//   alpha = 0.2
//   context_passthrough = false
//   [backends]
//   policy = "http://localhost:8080"
//   grounding = "exec:python3 grounding.py"
//   highlight = ""
//   ocr = ""
//   answer = ""
//   questioner = ""
//   combiner = ""
//   max_in_flight = 1
//   timeout_ms = 30000
//   [run]
//   parallelism = 1
//
// Precedence: command-line flags > config file > built-in defaults. The file
// comes from --config, else $REASONFORGE_CONFIG. Unknown sections or keys are
// rejected.

#include <array>
#include <cstdint>
#include <string>

namespace reasonforge {

struct Config {
    std::uint64_t seed = 42;
    int max_chain_len = 4;
    double delta = 0.05;
    double min_confidence = 0.5;

    int max_steps = 8;
    double alpha = 0.2;
    bool context_passthrough = false;

    std::string policy_endpoint;                    // empty = scripted
    std::array<std::string, 4> tool_endpoints{};    // by ToolKind; empty = oracle
    std::string questioner_endpoint;                // empty = templates
    std::string combiner_endpoint;                  // empty = templates
    int max_in_flight = 1;
    int timeout_ms = 30000;

    int parallelism = 1;

    /// Throws Error(Config) for out-of-range values.
    void check() const;
};

/// Applies the assignments in `text` on top of `base`. Throws Error(Config)
/// naming the line on syntax errors and unknown keys.
Config parse_config(std::string_view text, Config base = {});
Config load_config(const std::string& path, Config base = {});

}  // namespace reasonforge
