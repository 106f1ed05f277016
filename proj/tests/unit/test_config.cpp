#include "doctest.h"
#include "reasonforge/config.hpp"
#include "reasonforge/error.hpp"

using namespace reasonforge;

TEST_CASE("defaults") {
    const Config c;
    CHECK(c.seed == 42);
    CHECK(c.max_chain_len == 4);
    CHECK(c.delta == 0.05);
    CHECK(c.min_confidence == 0.5);
    CHECK(c.max_steps == 8);
    CHECK(c.alpha == 0.2);
    CHECK_FALSE(c.context_passthrough);
    CHECK_NOTHROW(c.check());
}

TEST_CASE("parse_config applies sections over a base") {
    const Config c = parse_config(R"(
# operator settings
[synthesis]
seed = 7
delta = 0.1   # wider groups
[reasoner]
alpha = 0.5
context_passthrough = true
[backends]
policy = "http://localhost:8080"
ocr = "exec:python3 ocr.py # not a comment"
[run]
parallelism = 4
)");
    CHECK(c.seed == 7);
    CHECK(c.delta == 0.1);
    CHECK(c.alpha == 0.5);
    CHECK(c.context_passthrough);
    CHECK(c.policy_endpoint == "http://localhost:8080");
    CHECK(c.tool_endpoints[2] == "exec:python3 ocr.py # not a comment");
    CHECK(c.tool_endpoints[0].empty());
    CHECK(c.parallelism == 4);
    CHECK(c.max_steps == 8);
    CHECK_NOTHROW(c.check());
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("[synthesis]\nsed = 1\n"), Error);
    CHECK_THROWS_AS(parse_config("seed = 1\n"), Error);
    CHECK_THROWS_AS(parse_config("[synthesis]\nseed = abc\n"), Error);
    CHECK_THROWS_AS(parse_config("[reasoner]\ncontext_passthrough = yes\n"), Error);
    CHECK_THROWS_AS(parse_config("[synthesis\n"), Error);
    CHECK_THROWS_AS(parse_config("[reasoner]\nalpha = 0\n").check(), Error);
    CHECK_THROWS_AS(parse_config("[backends]\npolicy = \"ftp://x\"\n").check(), Error);
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), Error);
    try {
        parse_config("\n\n[run]\nthreads = 2\n");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}
