#include "cli.hpp"

#include "roadlabel/serialization.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <thread>

namespace roadlabel::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

void setup_logging() {
    auto logger = spdlog::get("roadlabel");
    if (!logger) logger = spdlog::stderr_color_mt("roadlabel");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    const char* env = std::getenv("ROADLABEL_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

void print_error(std::string_view kind, const std::string& message, int code) {
    const nlohmann::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << std::endl;
}

// Flag values that override the config file when given.
struct Overrides {
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> graph_seed;
    std::optional<double> threshold;
    std::optional<double> subsample;
    std::optional<std::uint64_t> subsample_seed;
    bool no_highpass = false;
};

struct Context {
    std::string config_path;
    Overrides flags;

    PipelineConfig config() const {
        PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
        if (flags.workers) c.workers = std::max(1u, *flags.workers);
        if (flags.graph_seed) c.graph_seed = *flags.graph_seed;
        if (flags.threshold) c.graph.threshold = *flags.threshold;
        if (flags.subsample) c.subsample = *flags.subsample;
        if (flags.subsample_seed) c.subsample_seed = *flags.subsample_seed;
        if (flags.no_highpass) c.fm.highpass_enabled = false;
        c.graph.validate();
        if (!(c.subsample > 0.0 && c.subsample <= 1.0)) throw Error(ErrorKind::Config, "subsample must be in (0, 1]");
        return c;
    }
};

std::function<void(std::size_t, std::size_t)> progress_logger(const std::string& what) {
    return [what, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
        const std::size_t decile = total ? done * 10 / total : 10;
        if (decile != last || done == total) {
            last = decile;
            spdlog::info("{}: {}/{} pairs", what, done, total);
        }
    };
}

TransformGraph build_feed_graph(const FeedDir& fd, const PipelineConfig& cfg) {
    BuildOptions opts;
    opts.workers = cfg.workers;
    opts.progress = progress_logger(fd.feed.camera_id);
    auto built = build_graph(fd.feed.frames, cfg.graph, cfg.fm, cfg.graph_seed, opts);
    for (const auto& f : built.report.failures)
        spdlog::warn("{}: pair {} - {} failed: {}", fd.feed.camera_id, f.i, f.j, f.reason);
    spdlog::info("{}: {} frames, {} edges", fd.feed.camera_id, built.graph.frames.size(), built.graph.edges.size());
    return std::move(built.graph);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

// -- subcommands -------------------------------------------------------------

int cmd_register(const Context& ctx, const std::string& a, const std::string& b) {
    const PipelineConfig cfg = ctx.config();
    const Frame fa = load_frame(a, "", fs::path(a).stem().string(), 0);
    const Frame fb = load_frame(b, "", fs::path(b).stem().string(), 0);
    const RegistrationResult r = register_frames(fa, fb, cfg.fm);
    const nlohmann::json j = {{"s", r.transform.scale},
                              {"theta_deg", r.transform.rotation * 180.0 / std::numbers::pi},
                              {"tx", r.transform.tx},
                              {"ty", r.transform.ty},
                              {"response", r.response}};
    std::cout << j.dump() << std::endl;
    return 0;
}

int cmd_graph(const Context& ctx, const std::string& feed_dir, const std::string& out, std::string camera) {
    const PipelineConfig cfg = ctx.config();
    if (camera.empty()) camera = fs::absolute(feed_dir).lexically_normal().filename().string();
    const FeedDir fd = load_feed_dir(feed_dir, camera);
    OutputLock lock(parent_or_cwd(out));
    write_graph(build_feed_graph(fd, cfg), out);
    return 0;
}

int cmd_chain(const Context& ctx, const std::string& graph_path, const std::string& reference, const std::string& out) {
    const PipelineConfig cfg = ctx.config();
    const TransformGraph g = read_graph(graph_path);
    const auto chains = chain_all(g, reference, cfg.graph.threshold);
    if (out.empty()) {
        for (const auto& c : chains) std::cout << nlohmann::json(c).dump() << '\n';
        std::cout.flush();
    } else {
        OutputLock lock(parent_or_cwd(out));
        write_chains(chains, out);
    }
    std::size_t ok = 0;
    for (const auto& c : chains) ok += c.status == ChainStatus::Ok;
    spdlog::info("{} of {} frames chained above threshold {}", ok, chains.size(), cfg.graph.threshold);
    return 0;
}

// Keeps the subsampled frames plus the reference, which every mode needs.
Feed subsampled(const FeedDir& fd, double fraction, std::uint64_t seed) {
    if (fraction >= 1.0) return fd.feed;
    Feed out{fd.feed.camera_id, subsample(std::span<const Frame>(fd.feed.frames), fraction, seed)};
    const auto& ref = fd.annotation.reference_frame_id;
    const bool has_ref = std::any_of(out.frames.begin(), out.frames.end(), [&](const Frame& f) { return f.frame_id == ref; });
    if (!has_ref)
        for (const Frame& f : fd.feed.frames)
            if (f.frame_id == ref) {
                auto pos = std::lower_bound(out.frames.begin(), out.frames.end(), f, [](const Frame& a, const Frame& b) {
                    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.frame_id < b.frame_id;
                });
                out.frames.insert(pos, f);
            }
    return out;
}

int cmd_transfer(const Context& ctx, const std::string& mode_name, std::string feeds_dir, std::string out_dir,
                 const std::string& graphs_dir) {
    const PipelineConfig cfg = ctx.config();
    const DatasetMode mode = parse_dataset_mode(mode_name);
    if (feeds_dir.empty()) feeds_dir = cfg.data_root.string();
    if (out_dir.empty()) out_dir = (cfg.output_root / to_string(mode)).string();

    const std::vector<FeedDir> feed_dirs = load_feeds(feeds_dir);
    OutputLock lock(out_dir);

    std::vector<Feed> feeds;
    std::vector<FeedAnnotation> annotations;
    ChainsByCamera chains;
    for (const FeedDir& full : feed_dirs) {
        // Subsampling comes first, so graphs are built over the kept frames only.
        const FeedDir fd{subsampled(full, cfg.subsample, cfg.subsample_seed), full.annotation};
        if (mode == DatasetMode::Corrected && fd.annotation.manual_mask) {
            TransformGraph g;
            const fs::path cached = graphs_dir.empty() ? fs::path() : fs::path(graphs_dir) / (fd.feed.camera_id + ".graph.jsonl");
            if (!cached.empty() && fs::exists(cached)) {
                g = read_graph(cached);
                spdlog::info("{}: using graph {}", fd.feed.camera_id, cached.string());
            } else {
                g = build_feed_graph(fd, cfg);
                if (!cached.empty()) {
                    fs::create_directories(cached.parent_path());
                    write_graph(g, cached);
                }
            }
            chains[fd.feed.camera_id] = chain_all(g, fd.annotation.reference_frame_id, cfg.graph.threshold);
        }
        feeds.push_back(fd.feed);
        annotations.push_back(fd.annotation);
    }

    Dataset ds;
    switch (mode) {
    case DatasetMode::Baseline: ds = emit_baseline(feeds, annotations); break;
    case DatasetMode::Reuse: ds = emit_reuse(feeds, annotations); break;
    case DatasetMode::Corrected: ds = emit_corrected(feeds, annotations, chains, cfg.graph.threshold); break;
    }
    write_dataset(ds, feeds, out_dir);
    spdlog::info("{}: {} entries written, {} reported", to_string(mode), ds.entries.size(), ds.report.size());
    return 0;
}

DriftScenario load_scenario(const std::string& arg, std::optional<std::uint64_t> seed) {
    if (arg == "static" || arg == "drift" || arg == "stress") return DriftScenario::preset(arg, seed.value_or(1));
    std::ifstream in(arg);
    if (!in) throw Error(ErrorKind::Config, "unknown scenario (not a preset or readable file): " + arg);
    DriftScenario s;
    try {
        s = nlohmann::json::parse(in).get<DriftScenario>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, arg + ": " + e.what());
    }
    if (seed) s.seed = *seed;
    return s;
}

int cmd_bench(const Context& ctx, const std::string& scenario_arg, std::optional<std::uint64_t> seed,
              const std::string& out, const std::string& overlays, const std::string& emit_feed,
              const std::string& camera) {
    const PipelineConfig cfg = ctx.config();
    const DriftScenario scenario = load_scenario(scenario_arg, seed);
    scenario.validate();

    std::optional<OutputLock> feed_lock, overlay_lock;
    if (!emit_feed.empty()) {
        feed_lock.emplace(emit_feed);
        const SyntheticFeed feed = generate_feed(scenario, camera);
        write_feed_dir(fs::path(emit_feed) / camera, feed, static_cast<std::size_t>(scenario.reference_index));
        write_text(fs::path(emit_feed) / "scenario.json", nlohmann::json(scenario).dump(2) + "\n");
        spdlog::info("wrote {} frames to {}", feed.frames.size(), (fs::path(emit_feed) / camera).string());
    }

    BenchmarkOptions opts;
    opts.graph = cfg.graph;
    opts.fm = cfg.fm;
    opts.graph_seed = cfg.graph_seed;
    opts.workers = cfg.workers;
    std::optional<fs::path> overlay_dir;
    if (!overlays.empty()) {
        overlay_lock.emplace(overlays);
        overlay_dir = overlays;
    }
    const BenchmarkReport report = run_benchmark(scenario, opts, overlay_dir);
    const std::string text = nlohmann::json(report).dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
        std::cout.flush();
    } else {
        write_text(out, text);
    }
    spdlog::info("{}: emitted {}, filtered {}, corrected IoU {:.4f}, reuse IoU {:.4f}", report.scenario,
                 report.emitted, report.filtered, report.mean_iou_corrected, report.mean_iou_reuse_paired);
    return 0;
}

int cmd_overlay(const std::string& frame_path, const std::string& mask_path, const std::string& out, double alpha) {
    const Frame frame = load_frame(frame_path, "", fs::path(frame_path).stem().string(), 0);
    const LabelMask mask = load_mask(mask_path, Provenance::Manual, frame.frame_id);
    if (mask.width != frame.width || mask.height != frame.height)
        throw Error(ErrorKind::DimensionMismatch, "mask and frame sizes differ");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Config, "alpha must lie in [0, 1]");
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    save_frame_png(overlay_mask(frame, mask, alpha), out);
    return 0;
}

int cmd_ingest(const Context& ctx, const std::string& root_override, bool once, double duration) {
    const PipelineConfig cfg = ctx.config();
    if (!cfg.ingest) throw Error(ErrorKind::Config, "config has no ingest section");
    IngestConfig ic = *cfg.ingest;
    if (!root_override.empty()) ic.root = root_override;
    ic.validate();
    OutputLock lock(ic.root);

    if (once) {
        FeedStore store(ic.root);
        auto fetcher = make_http_fetcher(ic.timeout);
        const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::system_clock::now().time_since_epoch()).count();
        std::size_t stored = 0, failed = 0;
        for (const auto& src : ic.sources) {
            if (!src.active()) continue;
            const PollResult r = poll_once(src, *fetcher, store, now, ic.retry);
            if (r.stored) {
                ++stored;
                spdlog::info("{}: stored {}", src.camera_id, r.stored->path);
            }
            if (r.failure) {
                ++failed;
                spdlog::warn("{}: {} (status {})", src.camera_id, r.failure->error, r.failure->status);
            }
        }
        // Failed fetches are logged in failures.jsonl and are not a process error.
        spdlog::info("ingest: {} stored, {} failed", stored, failed);
        return 0;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    Scheduler scheduler(ic, [t = ic.timeout] { return make_http_fetcher(t); });
    scheduler.start();
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        if (duration > 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(duration)) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    scheduler.stop();
    spdlog::info("ingest stopped after {} polls", scheduler.polls());
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Road-label transfer for stationary roadside cameras"};
    app.require_subcommand(1);
    app.fallthrough();

    Context ctx;
    unsigned workers = 0;
    std::uint64_t graph_seed = 0;
    double threshold = 0.0;
    // Input files are not checked by the parser: a missing file is an I/O
    // error (exit 3), not a usage error.
    app.add_option("-c,--config", ctx.config_path, "Pipeline config (JSON)");
    auto* o_workers = app.add_option("-j,--workers", workers, "Registration worker threads");
    auto* o_gseed = app.add_option("--graph-seed", graph_seed, "Pair-sampling seed");
    auto* o_thresh = app.add_option("--threshold", threshold, "Minimum chain response product");
    app.add_flag("--no-highpass", ctx.flags.no_highpass, "Disable the spectrum high-pass filter");

    std::string a, b, out, feed_dir, camera, graph_path, reference, mode, feeds, graphs, scenario, overlays,
        emit_feed, root;
    double alpha = 0.45, subsample_fraction = 1.0, duration = 0.0;
    std::uint64_t subsample_seed = 0, bench_seed = 0;
    bool once = false;

    auto* reg = app.add_subcommand("register", "Register two images and print the transform");
    reg->add_option("imgA", a)->required();
    reg->add_option("imgB", b)->required();

    auto* graph = app.add_subcommand("graph", "Build the transform graph of one feed directory");
    graph->add_option("feed-dir", feed_dir)->required();
    graph->add_option("-o,--out", out, "Graph file (JSONL)")->required();
    graph->add_option("--camera", camera, "Camera id (default: directory name)");

    auto* chain = app.add_subcommand("chain", "Optimal chains from a reference frame");
    chain->add_option("graph", graph_path)->required();
    chain->add_option("ref-frame", reference)->required();
    chain->add_option("-o,--out", out, "Chains file (JSONL); stdout when omitted");

    auto* transfer = app.add_subcommand("transfer", "Emit a training dataset");
    transfer->add_option("mode", mode, "baseline | reuse | corrected")->required();
    transfer->add_option("--feeds", feeds, "Feed root (default: config data_root)");
    transfer->add_option("-o,--out", out, "Dataset directory (default: <output_root>/<mode>)");
    transfer->add_option("--graphs", graphs, "Graph cache directory (<camera>.graph.jsonl)");
    auto* o_sub = transfer->add_option("--subsample", subsample_fraction, "Fraction of frames to keep per camera");
    auto* o_subseed = transfer->add_option("--subsample-seed", subsample_seed);

    auto* bench = app.add_subcommand("bench", "Run the synthetic drift benchmark");
    bench->add_option("scenario", scenario, "static | drift | stress | scenario JSON file")->required();
    auto* o_bseed = bench->add_option("--seed", bench_seed, "Scenario seed");
    bench->add_option("-o,--out", out, "Report file (JSON); stdout when omitted");
    bench->add_option("--overlays", overlays, "Directory for overlay PNGs");
    bench->add_option("--emit-feed", emit_feed, "Also write the synthetic feed as a feed directory");
    bench->add_option("--camera", camera, "Camera id of the emitted feed")->default_val("synthetic");

    auto* overlay = app.add_subcommand("overlay", "Blend a mask over a frame");
    overlay->add_option("frame", a)->required();
    overlay->add_option("mask", b)->required();
    overlay->add_option("-o,--out", out, "Output PNG")->required();
    overlay->add_option("--alpha", alpha, "Tint strength in [0,1]");

    auto* ingest = app.add_subcommand("ingest", "Poll camera feeds into the data root");
    ingest->add_flag("--once", once, "Poll every active source once and exit");
    ingest->add_option("--duration", duration, "Stop after this many seconds (default: until interrupted)");
    ingest->add_option("--root", root, "Storage root (default: config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what(), 2);
        return 2;
    }

    if (*o_workers) ctx.flags.workers = workers;
    if (*o_gseed) ctx.flags.graph_seed = graph_seed;
    if (*o_thresh) ctx.flags.threshold = threshold;
    if (*o_sub) ctx.flags.subsample = subsample_fraction;
    if (*o_subseed) ctx.flags.subsample_seed = subsample_seed;

    try {
        if (*reg) return cmd_register(ctx, a, b);
        if (*graph) return cmd_graph(ctx, feed_dir, out, camera);
        if (*chain) return cmd_chain(ctx, graph_path, reference, out);
        if (*transfer) return cmd_transfer(ctx, mode, feeds, out, graphs);
        if (*bench)
            return cmd_bench(ctx, scenario, *o_bseed ? std::optional<std::uint64_t>(bench_seed) : std::nullopt, out,
                             overlays, emit_feed, camera);
        if (*overlay) return cmd_overlay(a, b, out, alpha);
        if (*ingest) return cmd_ingest(ctx, root, once, duration);
    } catch (const Error& e) {
        const int code = exit_code(e.kind());
        print_error(to_string(e.kind()), e.what(), code);
        return code;
    } catch (const fs::filesystem_error& e) {
        print_error(to_string(ErrorKind::Io), e.what(), 3);
        return 3;
    } catch (const std::exception& e) {
        print_error("internal", e.what(), 1);
        return 1;
    }
    return 0;
}

}  // namespace roadlabel::cli
