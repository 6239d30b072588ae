// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   roadlabel_acceptance [--only N] [--scratch DIR]

#include "cli.hpp"
#include "roadlabel/chaingraph.hpp"
#include "roadlabel/error.hpp"
#include "roadlabel/registration.hpp"
#include "roadlabel/rng.hpp"
#include "roadlabel/synthbench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace roadlabel;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Fifty random similarity transforms of a 512x512 textured scene.
Verdict registration_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(5150);
    int within = 0;
    double worst_px = 0.0;
    for (int k = 0; k < 50; ++k) {
        SceneRecipe scene;
        scene.width = scene.height = 512;
        scene.seed = 4000 + static_cast<std::uint64_t>(k);
        const double radius = 20.0 * rng.uniform();
        const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const SimilarityTransform truth{rng.uniform(0.9, 1.1), rng.uniform(-10.0, 10.0) * kDeg,
                                        radius * std::cos(heading), radius * std::sin(heading)};
        const RegistrationResult r = register_images(render_scene(scene, SimilarityTransform::identity()),
                                                     render_scene(scene, truth));
        const TransformError e = transform_error(r.transform, truth);
        worst_px = std::max(worst_px, e.translation_px);
        within += e.scale_rel <= 0.01 && e.rotation_deg <= 0.5 && e.translation_px <= 0.5;
    }
    const double elapsed = seconds_since(t0);
    return {within >= 48 && elapsed < 120.0,
            fmt("%d/50 within (1%%, 0.5 deg, 0.5 px), worst translation %.3f px, %.1f s", within, worst_px, elapsed)};
}

GrayImage blurred_noise(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    GrayImage img(w, h);
    for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float s = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) s += img.at((x + dx + w) % w, (y + dy + h) % h);
            out.values()[static_cast<std::size_t>(y) * w + x] = s / 9;
        }
    return out;
}

// 2. Every image registered against itself.
Verdict self_registration() {
    std::vector<std::pair<std::string, GrayImage>> images;
    for (auto [w, h, seed] : std::vector<std::array<int, 3>>{{256, 256, 1}, {512, 512, 2}, {320, 240, 3},
                                                              {200, 300, 4}, {128, 128, 5}}) {
        SceneRecipe s;
        s.width = w, s.height = h, s.seed = static_cast<std::uint64_t>(seed);
        images.emplace_back(fmt("scene %dx%d", w, h), render_scene(s, SimilarityTransform::identity()));
    }
    images.emplace_back("noise 256x256", blurred_noise(256, 256, 11));
    images.emplace_back("noise 160x120", blurred_noise(160, 120, 12));
    const SyntheticFeed drift = generate_feed(DriftScenario::preset("drift", 9));
    for (std::size_t k : {0u, 11u, 23u}) images.emplace_back("drift frame " + std::to_string(k), to_gray(drift.frames[k]));

    int ok = 0;
    double min_response = 1.0;
    std::string failed;
    for (const auto& [name, img] : images) {
        const RegistrationResult r = register_images(img, img);
        const TransformError e = transform_error(r.transform, SimilarityTransform::identity());
        min_response = std::min(min_response, r.response);
        if (e.translation_px <= 0.1 && e.rotation_deg <= 0.2 && e.scale_rel <= 0.005 && r.response >= 0.99) ++ok;
        else failed += " [" + name + "]";
    }
    const int n = static_cast<int>(images.size());
    return {ok == n, fmt("%d/%d images at identity, min response %.4f", ok, n, min_response) + failed};
}

// Exhaustive simple-path enumeration with the documented tie order:
// larger product, then fewer hops, then lexicographically smaller id path.
struct PathBest {
    double product = -1.0;
    std::vector<std::string> ids;
};

void enumerate(const TransformGraph& g, std::size_t at, std::size_t target, std::vector<std::size_t>& path,
               std::vector<char>& used, double product, PathBest& best) {
    if (at == target) {
        std::vector<std::string> ids;
        for (auto k : path) ids.push_back(g.frames[k].frame_id);
        const bool tie = std::abs(product - best.product) <= 1e-12 * std::max(1.0, product);
        if ((!tie && product > best.product) ||
            (tie && (ids.size() < best.ids.size() || (ids.size() == best.ids.size() && ids < best.ids))))
            best = {product, std::move(ids)};
        return;
    }
    for (const auto& e : g.edges) {
        const std::size_t next = e.i == at ? e.j : e.j == at ? e.i : g.frames.size();
        if (next == g.frames.size() || used[next] || !(e.response > 0)) continue;
        used[next] = 1;
        path.push_back(next);
        enumerate(g, next, target, path, used, product * e.response, best);
        path.pop_back();
        used[next] = 0;
    }
}

// 3. Max-product chains against brute force.
Verdict path_oracle() {
    Rng rng(31337);
    int compared = 0, mismatched = 0;
    double worst = 0.0;
    for (int instance = 0; instance < 200; ++instance) {
        TransformGraph g;
        const auto n = static_cast<std::size_t>(2 + rng.below(9));
        for (std::size_t k = 0; k < n; ++k)
            g.frames.push_back({std::to_string(500 + k), static_cast<std::int64_t>(500 + k)});
        const bool coarse = rng.uniform() < 0.3;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (rng.uniform() > 0.5) continue;
                const double r = coarse ? std::array{0.6, 0.8, 0.9, 1.0}[rng.below(4)] : rng.uniform(0.02, 1.0);
                const SimilarityTransform t{std::exp(rng.uniform(-0.05, 0.05)), rng.uniform(-0.1, 0.1),
                                            rng.uniform(-4, 4), rng.uniform(-4, 4)};
                if (rng.uniform() < 0.5) g.edges.push_back({i, j, t, r});
                else g.edges.push_back({j, i, t, r});
            }
        const std::size_t ref = rng.below(n);
        for (std::size_t t = 0; t < n; ++t) {
            if (t == ref) continue;
            const ChainResult got = optimal_chain(g, g.frames[ref].frame_id, g.frames[t].frame_id);
            PathBest want;
            std::vector<std::size_t> path{ref};
            std::vector<char> used(n, 0);
            used[ref] = 1;
            enumerate(g, ref, t, path, used, 1.0, want);
            ++compared;
            if (want.product < 0) {
                mismatched += got.status != ChainStatus::Unreachable;
                continue;
            }
            const double diff = std::abs(got.product - want.product);
            worst = std::max(worst, diff);
            mismatched += diff > 1e-9 || got.path != want.ids;
        }
    }
    return {mismatched == 0,
            fmt("%d chains over 200 graphs, %d mismatches, max product error %.2e", compared, mismatched, worst)};
}

// 4. Default constants: pair counts and the 0.45 product threshold.
Verdict default_constants() {
    const GraphParams p;
    std::vector<FrameNode> frames;
    for (int k = 0; k < 48; ++k) frames.push_back({std::to_string(k), k});
    const auto plan = plan_pairs(frames, p.batch_size, p.gamma, p.max_batch_distance, 1);
    std::size_t within = 0, cross = 0;
    for (const auto& pr : plan) (pr.i / 24 == pr.j / 24 ? within : cross) += 1;

    auto line_graph = [](double r) {
        TransformGraph g;
        for (int k = 0; k < 4; ++k) g.frames.push_back({std::to_string(k), k});
        for (std::size_t k = 0; k < 3; ++k) g.edges.push_back({k, k + 1, SimilarityTransform::identity(), r});
        return g;
    };
    const ChainResult low = optimal_chain(line_graph(0.76), "0", "3", p.threshold);
    const ChainResult high = optimal_chain(line_graph(0.77), "0", "3", p.threshold);
    const bool ok = p.batch_size == 24 && std::abs(p.gamma - 1 / 1.35) < 1e-15 && p.max_batch_distance == 8 &&
                    p.threshold == 0.45 && within == 552 && cross == 427 && low.status == ChainStatus::Filtered &&
                    high.status == ChainStatus::Ok;
    return {ok, fmt("48 frames -> %zu within + %zu cross; 0.76^3=%.6f %s, 0.77^3=%.6f %s", within, cross, low.product,
                    std::string(to_string(low.status)).c_str(), high.product,
                    std::string(to_string(high.status)).c_str())};
}

// 5. Corrected Reuse against Reuse on drifting synthetic feeds.
Verdict end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    double corrected = 0, reuse_all = 0, reuse_paired = 0, min_iou = 1.0, min_drift = 1e9;
    int seeds = 0;
    bool every_seed_better = true;
    for (std::uint64_t seed = 1; seeds < 20 && seed <= 40; ++seed) {
        const DriftScenario sc = DriftScenario::preset("drift", seed);
        double drift = 0.0;
        for (const auto& t : generate_feed(sc).truth)
            drift = std::max(drift, transform_error(t, SimilarityTransform::identity()).translation_px);
        if (drift < 10.0) continue;
        const BenchmarkReport r = run_benchmark(sc);
        if (r.emitted == 0) {
            min_iou = 0.0;
            every_seed_better = false;
        } else {
            min_iou = std::min(min_iou, r.min_iou_corrected);
        }
        corrected += r.mean_iou_corrected;
        reuse_all += r.mean_iou_reuse_all;
        reuse_paired += r.mean_iou_reuse_paired;
        every_seed_better = every_seed_better && r.mean_iou_corrected > r.mean_iou_reuse_paired;
        min_drift = std::min(min_drift, drift);
        ++seeds;
    }
    corrected /= seeds, reuse_all /= seeds, reuse_paired /= seeds;
    const bool ok = seeds >= 20 && corrected > reuse_all && corrected > reuse_paired && min_iou >= 0.95;
    return {ok, fmt("%d seeds (drift >= %.1f px): corrected %.4f vs reuse %.4f (paired %.4f), min frame IoU %.4f, "
                    "corrected ahead on every seed: %s, %.0f s",
                    seeds, min_drift, corrected, reuse_all, reuse_paired, min_iou, every_seed_better ? "yes" : "no",
                    seconds_since(t0))};
}

// 6. Composed translation error stays within the hop count.
Verdict chain_error_bound() {
    int eligible = 0, held = 0;
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SceneRecipe scene;
        scene.seed = 7000 + seed;
        const ChainErrorTrial t = measure_chain_error(scene, 1 + seed % 8, seed);
        if (*std::max_element(t.edge_errors_px.begin(), t.edge_errors_px.end()) > 1.0) continue;
        ++eligible;
        held += t.composed_error_px <= static_cast<double>(t.hops);
        worst_ratio = std::max(worst_ratio, t.composed_error_px / static_cast<double>(t.hops));
    }
    const bool ok = eligible >= 50 && held >= 0.99 * eligible;
    return {ok, fmt("%d/100 chains eligible, bound held on %d, worst error/hops %.3f px", eligible, held, worst_ratio)};
}

// 7. Metric identities, checked in exact integer arithmetic and in the
// reported doubles.
Verdict metric_identities() {
    Rng rng(77);
    int exact_fail = 0, float_fail = 0;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::uint64_t scale = std::array<std::uint64_t, 3>{10, 10000, 10000000}[k % 3];
        std::uint64_t tp = rng.below(scale), fp = rng.below(scale), fn = rng.below(scale), tn = rng.below(scale);
        if (k % 50 == 1) fp = 0;
        if (k % 50 == 2) fn = 0;
        if (k % 50 == 3) tp = 0;
        if (tp + fp + fn == 0) tp = 1;
        const MetricsReport m = MetricsReport::from_counts(tp, fp, fn, tn);

        // f1 = 2tp/(2tp+fp+fn) and 2*iou/(1+iou) reduce to the same fraction;
        // iou <= precision and iou <= recall since denominators only grow.
        using i128 = __int128;
        const i128 a = tp, b = fp, c = fn;
        const i128 f1_num = 2 * a, f1_den = 2 * a + b + c;
        const i128 iou_num = a, iou_den = a + b + c;
        const bool identity = f1_num * (iou_den + iou_num) == 2 * iou_num * f1_den;
        const bool le_p = b + a == 0 || iou_num * (a + b) <= a * iou_den;
        const bool le_r = c + a == 0 || iou_num * (a + c) <= a * iou_den;
        exact_fail += !(identity && le_p && le_r);

        const double diff = std::abs(m.f1 - 2 * m.iou / (1 + m.iou));
        worst = std::max(worst, diff);
        float_fail += diff > 1e-12 || m.iou > m.precision || m.iou > m.recall;
    }
    return {exact_fail == 0 && float_fail == 0,
            fmt("1000 matrices: %d exact failures, %d floating failures, max |f1 - 2iou/(1+iou)| %.1e", exact_fail,
                float_fail, worst)};
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "roadlabel");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    return cli::run(static_cast<int>(args.size()), argv.data());
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == ".roadlabel.lock") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
}

// 8. The whole pipeline, twice, from a synthetic feed on disk.
Verdict determinism(const fs::path& scratch) {
    const fs::path feeds = scratch / "feeds";
    if (run_cli({"bench", "drift", "--seed", "6", "--emit-feed", feeds.string(), "--camera", "cam", "-o",
                 (scratch / "bench.json").string()}) != 0)
        return {false, "could not emit the synthetic feed"};
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"run-a", "run-b"}) {
        const fs::path out = scratch / name;
        for (const char* mode : {"baseline", "reuse", "corrected"})
            if (run_cli({"-j", "2", "transfer", mode, "--feeds", feeds.string(), "--graphs", (out / "graphs").string(),
                         "--subsample", "0.75", "--subsample-seed", "5", "-o", (out / mode).string()}) != 0)
                return {false, std::string("transfer ") + mode + " failed"};
        runs.push_back(tree_bytes(out));
    }
    std::size_t masks = 0, manifests = 0;
    for (const auto& [path, bytes] : runs[0]) {
        masks += path.ends_with(".png");
        manifests += path.ends_with("manifest.jsonl");
    }
    const bool ok = runs[0] == runs[1] && masks > 0 && manifests == 3;
    return {ok, fmt("%zu files (%zu manifests, %zu masks, graphs and reports) %s across runs", runs[0].size(),
                    manifests, masks, runs[0] == runs[1] ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    fs::path scratch;
    for (int k = 1; k + 1 < argc; k += 2) {
        const std::string flag = argv[k];
        if (flag == "--only") only = std::atoi(argv[k + 1]);
        else if (flag == "--scratch") scratch = argv[k + 1];
    }
    const bool own_scratch = scratch.empty();
    if (own_scratch) scratch = fs::temp_directory_path() / ("roadlabel-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    ::setenv("ROADLABEL_LOG", "warn", 0);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"registration recovery", registration_recovery},
        {"self-registration", self_registration},
        {"path oracle", path_oracle},
        {"default constants", default_constants},
        {"corrected beats reuse", end_to_end},
        {"chained error bound", chain_error_bound},
        {"metric identities", metric_identities},
        {"determinism", [&] { return determinism(scratch); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (only && static_cast<std::size_t>(only) != k + 1) continue;
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s [%zu] %s: %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    if (own_scratch) fs::remove_all(scratch);
    return failed ? 1 : 0;
}
