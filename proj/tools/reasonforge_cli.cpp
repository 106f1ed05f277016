// reasonforge: command-line entry point.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or input error
// (including eval id mismatches), 3 synthesis produced no paths, 4 validation
// found failing paths.

#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "reasonforge/config.hpp"
#include "reasonforge/dataset.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/evalharness.hpp"
#include "reasonforge/reasoner.hpp"
#include "reasonforge/synthesis.hpp"

using namespace reasonforge;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNoYield = 3;
constexpr int kExitInvalid = 4;

/// Flags shared by several commands. Each is applied only when given, so the
/// config file fills in whatever the command line leaves out.
struct Overrides {
    std::string config_path;
    std::uint64_t seed = 0;
    int max_chain_len = 0;
    double delta = 0;
    double min_confidence = 0;
    int max_steps = 0;
    double alpha = 0;
    int parallelism = 0;
    std::string policy_endpoint;
    std::string tools_endpoint;
    std::string questioner;
    std::string combiner;
    bool context_passthrough = false;
    std::vector<std::pair<CLI::Option*, std::function<void(Config&)>>> applied;

    template <typename T>
    void add(CLI::App* app, const std::string& name, T& slot, const std::string& help, T Config::*field) {
        CLI::Option* o = app->add_option(name, slot, help);
        applied.emplace_back(o, [&slot, field](Config& c) { c.*field = slot; });
    }
};

void add_config_flag(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "Config file (default: $REASONFORGE_CONFIG)");
}

void add_synthesis_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--seed", o.seed, "RNG seed (default 42)", &Config::seed);
    o.add(app, "--max-chain-len", o.max_chain_len, "Maximum nodes per chain (default 4)", &Config::max_chain_len);
    o.add(app, "--delta", o.delta, "Group proximity as a fraction of the image diagonal (default 0.05)",
          &Config::delta);
    o.add(app, "--min-confidence", o.min_confidence, "Entities at or below this confidence are dropped (default 0.5)",
          &Config::min_confidence);
    o.add(app, "--questioner", o.questioner, "Remote questioner endpoint (default: templates)",
          &Config::questioner_endpoint);
    o.add(app, "--combiner", o.combiner, "Remote combiner endpoint (default: templates)", &Config::combiner_endpoint);
}

void add_alpha_flag(CLI::App* app, Overrides& o) {
    o.add(app, "--alpha", o.alpha, "Crop-and-enlarge threshold as a fraction of image area (default 0.2)",
          &Config::alpha);
}

void add_parallelism_flag(CLI::App* app, Overrides& o) {
    o.add(app, "--parallelism", o.parallelism, "Worker threads (default 1)", &Config::parallelism);
}

Config resolve_config(const Overrides& o) {
    Config c;
    std::string path = o.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("REASONFORGE_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) c = load_config(path, c);
    for (const auto& [opt, apply] : o.applied) {
        if (opt->count() > 0) apply(c);
    }
    if (!o.tools_endpoint.empty()) c.tool_endpoints.fill(o.tools_endpoint);
    if (o.context_passthrough) c.context_passthrough = true;
    c.check();
    return c;
}

ToolBackendBinding tool_binding(const Config& c, bool remote) {
    ToolBackendBinding b = ToolBackendBinding::oracle(c.alpha);
    if (remote) {
        for (std::size_t i = 0; i < 4; ++i) {
            if (c.tool_endpoints[i].empty()) {
                throw Error::config(std::string("--tools remote needs an endpoint for ") + to_string(kAllTools[i]));
            }
            b.per_tool[i].endpoint = c.tool_endpoints[i];
        }
    }
    b.max_in_flight = c.max_in_flight;
    b.timeout_ms = c.timeout_ms;
    return b;
}

SceneSet load_scene_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error::config("scenes file '" + path + "' does not exist");
    return load_scenes(path);
}

void write_json_file(const std::string& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- commands

int cmd_gen_scenes(const SceneGenOptions& opts, const std::string& out) {
    save_scenes(generate_scenes(opts), out);
    std::cout << "wrote " << opts.count << " scenes to " << out << "\n";
    return 0;
}

int cmd_import(const std::string& in, const std::string& out) {
    const ImportResult r = import_detections_file(in);
    save_scenes(r.scenes, out);
    std::cout << "imported " << r.scenes.size() << " scenes, rejected " << r.rejected.size() << " entities\n";
    return 0;
}

struct SynthesizeArgs {
    std::string scenes, out;
    int per_scene = 5;
    std::size_t count = 0;
    bool render_images = false;
};

int cmd_synthesize(const SynthesizeArgs& a, const Config& c) {
    const SceneSet scenes = load_scene_file(a.scenes);
    GeneratorBinding g;
    g.rng_seed = c.seed;
    g.proximity_delta = c.delta;
    g.min_confidence = c.min_confidence;
    g.questioner_endpoint = c.questioner_endpoint;
    g.combiner_endpoint = c.combiner_endpoint;
    g.max_in_flight = c.max_in_flight;
    g.timeout_ms = c.timeout_ms;
    SynthesisOptions o;
    o.per_scene = a.per_scene;
    o.max_chain_len = c.max_chain_len;
    o.parallelism = c.parallelism;
    o.alpha = c.alpha;
    if (o.per_scene < 1) throw Error::config("--per-scene must be >= 1");
    auto paths = synthesize_dataset(scenes, g, o);
    if (a.count > 0 && paths.size() > a.count) paths.resize(a.count);
    write_dataset(a.out, paths, scenes, DatasetWriteOptions{c.alpha, a.render_images});
    std::cout << "synthesized " << paths.size() << " paths from " << scenes.size() << " scenes into " << a.out
              << "\n";
    return paths.empty() ? kExitNoYield : 0;
}

struct RunArgs {
    std::string dataset, scenes, out;
    std::string policy = "scripted";
    std::string tools = "oracle";
};

int cmd_run(const RunArgs& a, const Config& c) {
    const SceneSet scenes = load_scene_file(a.scenes);
    const auto paths = load_paths(a.dataset, &scenes, c.alpha);
    if (a.policy != "scripted" && a.policy != "remote") throw Error::config("--policy must be scripted or remote");
    if (a.tools != "oracle" && a.tools != "remote") throw Error::config("--tools must be oracle or remote");
    if (a.policy == "remote" && c.policy_endpoint.empty()) throw Error::config("--policy remote needs an endpoint");
    const ToolPool pool(scenes, tool_binding(c, a.tools == "remote"));
    TransportPool transports(TransportOptions{c.max_in_flight, c.timeout_ms});
    std::shared_ptr<Transport> policy_transport;
    if (a.policy == "remote") policy_transport = transports.get(c.policy_endpoint);

    std::vector<Trace> traces(paths.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < paths.size(); i = next++) {
            std::unique_ptr<Policy> policy;
            if (policy_transport) {
                policy = std::make_unique<RemotePolicy>(policy_transport);
            } else {
                policy = std::make_unique<ScriptedPolicy>(script_of(paths[i]));
            }
            traces[i] = run(task_of(paths[i]), *policy, pool, RunOptions{c.max_steps, c.context_passthrough});
        }
    };
    const int workers = std::max(1, std::min<int>(c.parallelism, static_cast<int>(paths.size())));
    std::vector<std::thread> threads;
    for (int w = 1; w < workers; ++w) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    write_file(a.out, serialize_traces(traces));
    std::size_t answered = 0;
    for (const auto& t : traces) answered += t.termination == Termination::Answered;
    std::cout << "ran " << traces.size() << " tasks, " << answered << " answered; traces in " << a.out << "\n";
    return 0;
}

struct ReplayArgs {
    std::string traces, scenes, out;
    std::string tools = "oracle";
};

int cmd_replay(const ReplayArgs& a, const Config& c) {
    const SceneSet scenes = load_scene_file(a.scenes);
    const auto traces = parse_traces(read_file(a.traces));
    const ToolPool pool(scenes, tool_binding(c, a.tools == "remote"));
    std::vector<Trace> replayed;
    std::size_t diverged = 0;
    for (const auto& t : traces) {
        if (t.steps.empty()) {
            replayed.push_back(t);
            continue;
        }
        Trace r = replay(t, pool);
        for (std::size_t k = 0; k < std::min(r.steps.size(), t.steps.size()); ++k) {
            if (r.steps[k].output != t.steps[k].output) {
                ++diverged;
                std::cout << t.task.id << ": first divergence at step " << (k + 1) << "\n";
                break;
            }
        }
        replayed.push_back(std::move(r));
    }
    if (!a.out.empty()) write_file(a.out, serialize_traces(replayed));
    std::cout << "replayed " << traces.size() << " traces, " << diverged << " diverged\n";
    return 0;
}

int cmd_validate(const std::string& dataset, const std::string& scenes_path, const Config& c) {
    const SceneSet scenes = load_scene_file(scenes_path);
    const auto paths = load_paths(dataset, &scenes, c.alpha);
    std::size_t failed = 0;
    for (const auto& p : paths) {
        const auto r = validate_example(p, scenes.at(p.scene_id), ValidationOptions{c.alpha, c.delta});
        if (!r.ok()) {
            ++failed;
            for (const auto& d : r.diagnostics) std::cout << p.id << ": " << d << "\n";
        }
    }
    std::cout << "validated " << paths.size() << " paths, " << failed << " failed\n";
    return failed ? kExitInvalid : 0;
}

struct EvalArgs {
    std::string traces, gold, scenes, out = "report.json";
    std::string metric = "em";
};

int cmd_eval(const EvalArgs& a, const Config& c) {
    const SceneSet scenes = load_scene_file(a.scenes);
    const auto traces = parse_traces(read_file(a.traces));
    const auto gold = load_paths(a.gold, &scenes, c.alpha);
    const ToolPool pool(scenes, tool_binding(c, false));
    EvalReport report;
    try {
        report = evaluate_corpus(traces, gold, pool, metric_from_string(a.metric), c.parallelism);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Precondition) throw;
        std::cerr << "reasonforge eval: " << e.what() << "\n";
        return kExitConfig;
    }
    write_json_file(a.out, report_to_json(report));
    std::cout << report_table(report);
    return 0;
}

int cmd_stats(const std::string& dataset, const std::string& scenes_path, const Config& c) {
    std::optional<SceneSet> scenes;
    if (!scenes_path.empty()) scenes = load_scene_file(scenes_path);
    const auto paths = load_paths(dataset, scenes ? &*scenes : nullptr, c.alpha);
    std::cout << corpus_stats(paths, scenes ? &*scenes : nullptr).dump(2) << "\n";
    return 0;
}

struct RenderArgs {
    std::string scenes, scene_id, out, dataset, path_id;
    int step = 0;
    int width = 0, height = 0;
};

int cmd_render(const RenderArgs& a) {
    const SceneSet scenes = load_scene_file(a.scenes);
    ViewState view;
    std::string scene_id = a.scene_id;
    if (!a.dataset.empty()) {
        if (a.path_id.empty() || a.step < 1) throw Error::config("--dataset needs --path and --step");
        const auto paths = load_paths(a.dataset, &scenes);
        const auto it = std::find_if(paths.begin(), paths.end(), [&](const auto& p) { return p.id == a.path_id; });
        if (it == paths.end()) throw Error::config("no path '" + a.path_id + "' in " + a.dataset);
        if (a.step > static_cast<int>(it->steps.size())) throw Error::config("--step out of range");
        view = it->steps[a.step - 1].view;
        scene_id = it->scene_id;
    } else {
        if (scene_id.empty()) throw Error::config("render needs --scene or --dataset/--path/--step");
        view = full_view(scenes.at(scene_id));
    }
    const Scene& scene = scenes.at(scene_id);
    const int w = a.width > 0 ? a.width : scene.width;
    const int h = a.height > 0 ? a.height : scene.height;
    write_file(a.out, encode_png(render(scene, view, w, h)));
    std::cout << "wrote " << w << "x" << h << " PNG to " << a.out << "\n";
    return 0;
}

Json serve_one(const SceneSet& scenes, const std::string& route, const Json& body) {
    if (route == "/v1/tool/invoke") return handle_tool_request(scenes, body);
    return handle_generator_request(route, body);
}

std::string stdio_route(const std::string& role, const Json& body) {
    if (role == "tools") return "/v1/tool/invoke";
    return body.contains("outer") ? "/v1/generate/combine" : "/v1/generate/question";
}

int cmd_serve(const std::string& scenes_path, const std::string& role, bool stdio, const std::string& host,
              int port) {
    if (role != "tools" && role != "generator") throw Error::config("--role must be tools or generator");
    SceneSet scenes;
    if (role == "tools") scenes = load_scene_file(scenes_path);
    if (stdio) {
        std::string line;
        while (std::getline(std::cin, line)) {
            if (line.empty()) continue;
            Json reply;
            try {
                const Json body = Json::parse(line);
                reply = serve_one(scenes, stdio_route(role, body), body);
            } catch (const std::exception& e) {
                reply = Json{{"ok", false}, {"error", e.what()}};
            }
            std::cout << reply.dump() << "\n" << std::flush;
        }
        return 0;
    }
    httplib::Server server;
    auto handler = [&](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(serve_one(scenes, req.path, Json::parse(req.body)).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(Json{{"ok", false}, {"error", e.what()}}.dump(), "application/json");
        }
    };
    server.Post("/v1/tool/invoke", handler);
    server.Post("/v1/generate/question", handler);
    server.Post("/v1/generate/combine", handler);
    std::cerr << "serving " << role << " on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw Error::io("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    CLI::App app{"reasonforge: least-to-most visual reasoning engine and data synthesis"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");
    std::function<int()> action;
    Overrides o;

    // gen-scenes
    SceneGenOptions gen;
    std::string gen_out;
    auto* g = app.add_subcommand("gen-scenes", "Generate synthetic scene graphs");
    g->add_option("--count", gen.count, "Number of scenes")->capture_default_str();
    g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
    g->add_option("--width", gen.width, "Scene width in pixels")->capture_default_str();
    g->add_option("--height", gen.height, "Scene height in pixels")->capture_default_str();
    g->add_option("--low-confidence-rate", gen.low_confidence_rate, "Rate of low-confidence distractors")
        ->capture_default_str();
    g->add_option("--out", gen_out, "Output scenes file")->required();
    g->callback([&] { action = [&] { return cmd_gen_scenes(gen, gen_out); }; });

    // import
    std::string imp_in, imp_out;
    auto* im = app.add_subcommand("import", "Convert detector output into a scenes file (invalid records dropped)");
    im->add_option("--detections", imp_in, "Detector JSON")->required();
    im->add_option("--out", imp_out, "Output scenes file")->required();
    im->callback([&] { action = [&] { return cmd_import(imp_in, imp_out); }; });

    // synthesize
    SynthesizeArgs sa;
    auto* sy = app.add_subcommand("synthesize", "Synthesize reasoning paths from scenes");
    sy->add_option("--scenes", sa.scenes, "Scenes file")->required();
    sy->add_option("--out", sa.out, "Output directory")->required();
    sy->add_option("--per-scene", sa.per_scene, "Paths per scene")->capture_default_str();
    sy->add_option("--count", sa.count, "Cap on the total number of paths (0 = no cap)")->capture_default_str();
    sy->add_flag("--render-images", sa.render_images, "Also write a PNG for every step view");
    add_config_flag(sy, o);
    add_synthesis_flags(sy, o);
    add_alpha_flag(sy, o);
    add_parallelism_flag(sy, o);

    // run
    RunArgs ra;
    auto* ru = app.add_subcommand("run", "Execute reasoning tasks and write traces");
    ru->add_option("--dataset", ra.dataset, "Dataset file (steps or e2e JSONL)")->required();
    ru->add_option("--scenes", ra.scenes, "Scenes file")->required();
    ru->add_option("--out", ra.out, "Output traces file")->required();
    ru->add_option("--policy", ra.policy, "scripted | remote")->capture_default_str();
    ru->add_option("--tools", ra.tools, "oracle | remote")->capture_default_str();
    o.add(ru, "--policy-endpoint", o.policy_endpoint, "Remote policy endpoint", &Config::policy_endpoint);
    ru->add_option("--tools-endpoint", o.tools_endpoint, "Endpoint for all four tools");
    o.add(ru, "--max-steps", o.max_steps, "Step limit per task (default 8)", &Config::max_steps);
    ru->add_flag("--context-passthrough", o.context_passthrough, "Send prior tool outputs to the policy");
    add_config_flag(ru, o);
    add_alpha_flag(ru, o);
    add_parallelism_flag(ru, o);

    // replay
    ReplayArgs rp;
    auto* re = app.add_subcommand("replay", "Re-execute recorded traces and report divergences");
    re->add_option("--traces", rp.traces, "Traces file")->required();
    re->add_option("--scenes", rp.scenes, "Scenes file")->required();
    re->add_option("--out", rp.out, "Write replayed traces here");
    re->add_option("--tools", rp.tools, "oracle | remote")->capture_default_str();
    re->add_option("--tools-endpoint", o.tools_endpoint, "Endpoint for all four tools");
    add_config_flag(re, o);
    add_alpha_flag(re, o);

    // validate
    std::string va_dataset, va_scenes;
    auto* va = app.add_subcommand("validate", "Run the three quality checks on every path");
    va->add_option("--dataset", va_dataset, "Dataset file")->required();
    va->add_option("--scenes", va_scenes, "Scenes file")->required();
    add_config_flag(va, o);
    add_alpha_flag(va, o);
    o.add(va, "--delta", o.delta, "Proximity used for 'near' (default 0.05)", &Config::delta);

    // eval
    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Score traces against gold paths and attribute errors");
    ev->add_option("--traces", ea.traces, "Traces file")->required();
    ev->add_option("--gold", ea.gold, "Gold dataset file")->required();
    ev->add_option("--scenes", ea.scenes, "Scenes file")->required();
    ev->add_option("--metric", ea.metric, "em | recall")->capture_default_str();
    ev->add_option("--out", ea.out, "Report JSON")->capture_default_str();
    add_config_flag(ev, o);
    add_alpha_flag(ev, o);
    add_parallelism_flag(ev, o);

    // stats
    std::string st_dataset, st_scenes;
    auto* st = app.add_subcommand("stats", "Print corpus statistics");
    st->add_option("--dataset", st_dataset, "Dataset file")->required();
    st->add_option("--scenes", st_scenes, "Scenes file (needed for e2e input and zero-yield scenes)");
    add_config_flag(st, o);

    // render
    RenderArgs rn;
    auto* rd = app.add_subcommand("render", "Render a scene or a dataset step view to PNG");
    rd->add_option("--scenes", rn.scenes, "Scenes file")->required();
    rd->add_option("--scene", rn.scene_id, "Scene id (full view)");
    rd->add_option("--dataset", rn.dataset, "Dataset file");
    rd->add_option("--path", rn.path_id, "Path id within --dataset");
    rd->add_option("--step", rn.step, "1-based step within --path");
    rd->add_option("--width", rn.width, "Output width (default: scene width)");
    rd->add_option("--height", rn.height, "Output height (default: scene height)");
    rd->add_option("--out", rn.out, "Output PNG")->required();

    // serve
    std::string sv_scenes, sv_role = "tools", sv_host = "127.0.0.1";
    bool sv_stdio = false;
    int sv_port = 8765;
    auto* sv = app.add_subcommand("serve", "Serve oracle tools or template generators over the wire protocol");
    sv->add_option("--scenes", sv_scenes, "Scenes file (tools role)");
    sv->add_option("--role", sv_role, "tools | generator")->capture_default_str();
    sv->add_flag("--stdio", sv_stdio, "Newline-delimited JSON on stdin/stdout instead of HTTP");
    sv->add_option("--host", sv_host, "HTTP bind address")->capture_default_str();
    sv->add_option("--port", sv_port, "HTTP port")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (action) return action();
        if (sy->parsed()) return cmd_synthesize(sa, resolve_config(o));
        if (ru->parsed()) return cmd_run(ra, resolve_config(o));
        if (re->parsed()) return cmd_replay(rp, resolve_config(o));
        if (va->parsed()) return cmd_validate(va_dataset, va_scenes, resolve_config(o));
        if (ev->parsed()) return cmd_eval(ea, resolve_config(o));
        if (st->parsed()) return cmd_stats(st_dataset, st_scenes, resolve_config(o));
        if (rd->parsed()) return cmd_render(rn);
        if (sv->parsed()) return cmd_serve(sv_scenes, sv_role, sv_stdio, sv_host, sv_port);
    } catch (const Error& e) {
        std::cerr << "reasonforge: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Config:
            case ErrorKind::Parse:
            case ErrorKind::Io:
            case ErrorKind::Precondition: return kExitConfig;
            default: return kExitFailure;
        }
    } catch (const std::exception& e) {
        std::cerr << "reasonforge: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
