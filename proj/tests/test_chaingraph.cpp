#include "roadlabel/chaingraph.hpp"
#include "roadlabel/error.hpp"
#include "roadlabel/synthbench.hpp"

#include "support.hpp"

#include <fstream>
#include <set>

using namespace roadlabel;
using namespace roadlabel::testing;

namespace {

constexpr double kGamma = 1.0 / 1.35;

std::vector<FrameNode> nodes(std::size_t n) {
    std::vector<FrameNode> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back({std::to_string(1000 + k), static_cast<std::int64_t>(1000 + k)});
    return out;
}

std::uint64_t choose2(std::uint64_t n) { return n * (n - 1) / 2; }

// Counts pairs by batch distance.
std::map<int, std::size_t> by_distance(const std::vector<FramePair>& plan, int batch) {
    std::map<int, std::size_t> out;
    for (const auto& p : plan) ++out[static_cast<int>(p.j / batch - p.i / batch)];
    return out;
}

TransformGraph make_graph(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
    TransformGraph g;
    g.frames = nodes(n);
    for (auto [i, j, r] : edges) g.edges.push_back({i, j, SimilarityTransform::identity(), r});
    return g;
}

struct Best {
    double product = -1.0;
    std::vector<std::size_t> path;
};

// Exhaustive enumeration of simple paths, with the same preference order
// as the search: higher product, then fewer hops, then smaller id sequence.
void enumerate(const TransformGraph& g, std::size_t at, std::size_t target, std::vector<std::size_t>& path,
               std::vector<bool>& used, double product, Best& best) {
    if (at == target) {
        auto ids = [&](const std::vector<std::size_t>& p) {
            std::vector<std::string> s;
            for (auto k : p) s.push_back(g.frames[k].frame_id);
            return s;
        };
        const bool tie = std::abs(product - best.product) <= 1e-12 * std::max(1.0, product);
        if ((!tie && product > best.product) ||
            (tie && (path.size() < best.path.size() ||
                     (path.size() == best.path.size() && ids(path) < ids(best.path))))) {
            best = {product, path};
        }
        return;
    }
    for (const auto& e : g.edges) {
        std::size_t next;
        if (e.i == at) next = e.j;
        else if (e.j == at) next = e.i;
        else continue;
        if (used[next] || !(e.response > 0)) continue;
        used[next] = true;
        path.push_back(next);
        enumerate(g, next, target, path, used, product * e.response, best);
        path.pop_back();
        used[next] = false;
    }
}

Best brute_force(const TransformGraph& g, std::size_t ref, std::size_t target) {
    Best best;
    std::vector<std::size_t> path{ref};
    std::vector<bool> used(g.frames.size(), false);
    used[ref] = true;
    enumerate(g, ref, target, path, used, 1.0, best);
    return best;
}

TransformGraph random_graph(Rng& rng) {
    TransformGraph g;
    const auto n = static_cast<std::size_t>(2 + rng.below(9));
    g.frames = nodes(n);
    const bool coarse = rng.uniform() < 0.3;  // coarse responses produce ties
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.uniform() > 0.45) continue;
            const double r = coarse ? std::array{0.5, 0.8, 0.9, 1.0}[rng.below(4)] : rng.uniform(0.05, 1.0);
            SimilarityTransform t{std::exp(rng.uniform(-0.1, 0.1)), rng.uniform(-0.2, 0.2), rng.uniform(-5, 5),
                                  rng.uniform(-5, 5)};
            if (rng.uniform() < 0.5) g.edges.push_back({i, j, t, r});
            else g.edges.push_back({j, i, t, r});
        }
    return g;
}

Frame frame_from(const GrayImage& g, std::size_t k) {
    Frame f = to_frame(g);
    f.camera_id = "cam";
    f.timestamp = 1000 + static_cast<std::int64_t>(k);
    f.frame_id = std::to_string(f.timestamp);
    return f;
}

}  // namespace

TEST(PlanPairs, TwoBatchesOfDefaultConstants) {
    const auto plan = plan_pairs(nodes(48), 24, kGamma, 8, 1);
    const auto d = by_distance(plan, 24);
    EXPECT_EQ(d.at(0), 552u);
    EXPECT_EQ(d.at(1), 427u);
    EXPECT_EQ(plan.size(), 979u);
}

TEST(PlanPairs, SingleBatchIsComplete) {
    const auto plan = plan_pairs(nodes(24), 24, kGamma, 8, 3);
    EXPECT_EQ(plan.size(), 276u);
    std::set<FramePair> all;
    for (std::size_t i = 0; i < 24; ++i)
        for (std::size_t j = i + 1; j < 24; ++j) all.insert({i, j});
    EXPECT_EQ(std::set<FramePair>(plan.begin(), plan.end()), all);
}

TEST(PlanPairs, NothingBeyondMaxDistance) {
    const auto plan = plan_pairs(nodes(240), 24, kGamma, 8, 5);
    for (const auto& p : plan) {
        EXPECT_LT(p.i, p.j);
        EXPECT_LE(p.j / 24 - p.i / 24, 8u);
        EXPECT_FALSE(p.i < 24 && p.j >= 216) << p.i << "," << p.j;
    }
    // Per-distance counts follow ceil(gamma^d * N_d).
    const auto d = by_distance(plan, 24);
    EXPECT_EQ(d.at(0), 10 * choose2(24));
    for (int dist = 1; dist <= 8; ++dist) {
        const double n_d = (10.0 - dist) * 24 * 24;
        EXPECT_EQ(d.at(dist), static_cast<std::size_t>(std::ceil(std::pow(kGamma, dist) * n_d - 1e-9))) << dist;
    }
    EXPECT_EQ(d.count(9), 0u);
}

TEST(PlanPairs, PartialFinalBatch) {
    const auto plan = plan_pairs(nodes(30), 24, kGamma, 8, 2);
    const auto d = by_distance(plan, 24);
    EXPECT_EQ(d.at(0), choose2(24) + choose2(6));
    EXPECT_EQ(d.at(1), static_cast<std::size_t>(std::ceil(kGamma * 24 * 6)));
}

TEST(PlanPairs, DeterministicSortedUniqueAndSeeded) {
    const auto a = plan_pairs(nodes(100), 24, kGamma, 8, 42);
    const auto b = plan_pairs(nodes(100), 24, kGamma, 8, 42);
    const auto c = plan_pairs(nodes(100), 24, kGamma, 8, 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.size(), c.size());
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::set<FramePair>(a.begin(), a.end()).size(), a.size());
}

TEST(PlanPairs, EdgeCases) {
    EXPECT_TRUE(plan_pairs({}, 24, kGamma, 8, 1).empty());
    EXPECT_TRUE(plan_pairs(nodes(1), 24, kGamma, 8, 1).empty());
    EXPECT_THROW(plan_pairs(nodes(4), 24, 1.0, 8, 1), Error);
    EXPECT_THROW(plan_pairs(nodes(4), 0, kGamma, 8, 1), Error);
}

TEST(GraphParams, Defaults) {
    const GraphParams p;
    EXPECT_EQ(p.batch_size, 24);
    EXPECT_DOUBLE_EQ(p.gamma, 1.0 / 1.35);
    EXPECT_EQ(p.max_batch_distance, 8);
    EXPECT_DOUBLE_EQ(p.threshold, 0.45);
    GraphParams bad;
    bad.threshold = 1.5;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Chain, TargetIsReference) {
    const auto g = make_graph(3, {{0, 1, 0.9}});
    const ChainResult r = optimal_chain(g, "1000", "1000");
    EXPECT_EQ(r.path, std::vector<std::string>{"1000"});
    EXPECT_EQ(r.product, 1.0);
    EXPECT_EQ(r.composed, SimilarityTransform::identity());
    EXPECT_EQ(r.status, ChainStatus::Ok);
    EXPECT_EQ(r.hops(), 0u);
}

TEST(Chain, TwoHopsBeatWeakDirectEdge) {
    const auto g = make_graph(3, {{0, 1, 0.9}, {1, 2, 0.9}, {0, 2, 0.7}});
    const ChainResult r = optimal_chain(g, "1000", "1002");
    EXPECT_EQ(r.path, (std::vector<std::string>{"1000", "1001", "1002"}));
    EXPECT_NEAR(r.product, 0.81, 1e-12);
    EXPECT_EQ(r.status, ChainStatus::Ok);
}

TEST(Chain, ThresholdAtDefaultValue) {
    const auto weak = make_graph(4, {{0, 1, 0.76}, {1, 2, 0.76}, {2, 3, 0.76}});
    const ChainResult filtered = optimal_chain(weak, "1000", "1003");
    EXPECT_NEAR(filtered.product, 0.438976, 1e-9);
    EXPECT_EQ(filtered.status, ChainStatus::Filtered);

    const auto strong = make_graph(4, {{0, 1, 0.77}, {1, 2, 0.77}, {2, 3, 0.77}});
    const ChainResult kept = optimal_chain(strong, "1000", "1003");
    EXPECT_NEAR(kept.product, 0.456533, 1e-9);
    EXPECT_EQ(kept.status, ChainStatus::Ok);
}

TEST(Chain, UnreachableAndUnknown) {
    const auto g = make_graph(4, {{0, 1, 0.9}, {2, 3, 1.0}});
    const auto all = chain_all(g, "1000");
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].status, ChainStatus::Ok);
    EXPECT_EQ(all[1].status, ChainStatus::Unreachable);
    EXPECT_EQ(all[2].status, ChainStatus::Unreachable);
    EXPECT_TRUE(all[1].path.empty());
    try {
        optimal_chain(g, "nope", "1001");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownFrame);
        EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
    }
    EXPECT_THROW(chain_all(g, "missing"), Error);
}

TEST(Chain, AllPerfectEdges) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> e;
    for (std::size_t k = 0; k + 1 < 6; ++k) e.emplace_back(k, k + 1, 1.0);
    for (const auto& r : chain_all(make_graph(6, e), "1002")) {
        EXPECT_EQ(r.status, ChainStatus::Ok);
        EXPECT_EQ(r.product, 1.0);
    }
}

TEST(Chain, TiesPreferFewerHopsThenSmallerIds) {
    // 0-1-3 and 0-2-3 both give 0.81; direct 0-3 at 0.81 wins on hops.
    auto g = make_graph(4, {{0, 1, 0.9}, {1, 3, 0.9}, {0, 2, 0.9}, {2, 3, 0.9}, {0, 3, 0.81}});
    EXPECT_EQ(optimal_chain(g, "1000", "1003").path, (std::vector<std::string>{"1000", "1003"}));
    g.edges.pop_back();
    EXPECT_EQ(optimal_chain(g, "1000", "1003").path, (std::vector<std::string>{"1000", "1001", "1003"}));
}

TEST(Chain, ComposesAgainstStoredDirection) {
    const SimilarityTransform a{1.1, 0.1, 3, -2};
    const SimilarityTransform b{0.95, -0.05, -1, 4};
    TransformGraph g;
    g.frames = nodes(3);
    g.edges.push_back({0, 1, a, 0.9});  // stored 0 -> 1
    g.edges.push_back({2, 1, b, 0.9});  // stored 2 -> 1, traversed 1 -> 2
    const ChainResult r = optimal_chain(g, "1000", "1002");
    const SimilarityTransform want = compose(a, invert(b));
    for (const Point2 p : {Point2{0, 0}, Point2{50, -20}, Point2{-100, 70}}) {
        EXPECT_NEAR(r.composed.apply(p).x, want.apply(p).x, 1e-9);
        EXPECT_NEAR(r.composed.apply(p).y, want.apply(p).y, 1e-9);
    }
    const ChainResult back = optimal_chain(g, "1002", "1000");
    for (const Point2 p : {Point2{10, 10}, Point2{-40, 3}}) {
        const Point2 q = back.composed.apply(r.composed.apply(p));
        EXPECT_NEAR(q.x, p.x, 1e-9);
        EXPECT_NEAR(q.y, p.y, 1e-9);
    }
}

TEST(Chain, MatchesBruteForceOn200Graphs) {
    Rng rng(2024);
    int compared = 0;
    for (int instance = 0; instance < 200; ++instance) {
        const TransformGraph g = random_graph(rng);
        const std::size_t ref = rng.below(g.frames.size());
        const auto all = chain_all(g, g.frames[ref].frame_id);
        std::size_t k = 0;
        for (std::size_t t = 0; t < g.frames.size(); ++t) {
            if (t == ref) continue;
            const ChainResult& got = all[k++];
            ASSERT_EQ(got.target_frame_id, g.frames[t].frame_id);
            const Best want = brute_force(g, ref, t);
            if (want.product < 0) {
                EXPECT_EQ(got.status, ChainStatus::Unreachable);
                continue;
            }
            ++compared;
            EXPECT_NEAR(got.product, want.product, 1e-9);
            std::vector<std::string> ids;
            for (auto n : want.path) ids.push_back(g.frames[n].frame_id);
            EXPECT_EQ(got.path, ids) << "instance " << instance;
            EXPECT_EQ(got.status, want.product < 0.45 ? ChainStatus::Filtered : ChainStatus::Ok);

            // Product and log-sum agree; product bounded by every edge on the path.
            double log_sum = 0.0, min_edge = 1.0;
            for (std::size_t h = 1; h < want.path.size(); ++h)
                for (const auto& e : g.edges)
                    if ((e.i == want.path[h - 1] && e.j == want.path[h]) ||
                        (e.j == want.path[h - 1] && e.i == want.path[h])) {
                        log_sum += -std::log(e.response);
                        min_edge = std::min(min_edge, e.response);
                    }
            EXPECT_NEAR(got.product, std::exp(-log_sum), 1e-9);
            EXPECT_LE(got.product, min_edge + 1e-15);
            EXPECT_GE(got.product, 0.0);
            EXPECT_LE(got.product, 1.0);

            const ChainResult single = optimal_chain(g, g.frames[ref].frame_id, g.frames[t].frame_id);
            EXPECT_EQ(single.path, got.path);
        }
    }
    EXPECT_GT(compared, 300);
}

TEST(BuildGraph, IdenticalFramesGiveStrongIdentityEdges) {
    const GrayImage base = random_texture(64, 64, 5);
    std::vector<Frame> feed;
    for (std::size_t k = 0; k < 10; ++k) feed.push_back(frame_from(base, k));
    GraphParams params;
    params.batch_size = 4;
    const BuildResult res = build_graph(feed, params, {}, 3);
    EXPECT_EQ(res.report.planned, plan_pairs(res.graph.frames, 4, params.gamma, 8, 3).size());
    EXPECT_EQ(res.graph.edges.size(), res.report.planned - res.report.failures.size());
    EXPECT_TRUE(res.report.failures.empty());
    for (const auto& e : res.graph.edges) {
        EXPECT_GE(e.response, 0.99);
        EXPECT_LE(transform_error(e.transform, SimilarityTransform::identity()).translation_px, 0.1);
    }
}

TEST(BuildGraph, NoiseFrameHasWeakEdges) {
    SceneRecipe sc;
    sc.width = sc.height = 96;
    std::vector<Frame> feed;
    Rng rng(4);
    for (std::size_t k = 0; k < 8; ++k) {
        const SimilarityTransform view{1.0, rng.uniform(-1, 1) * kDeg, rng.uniform(-2, 2), rng.uniform(-2, 2)};
        feed.push_back(frame_from(k == 5 ? white_noise(96, 96, 77) : render_scene(sc, view), k));
    }
    const BuildResult res = build_graph(feed, {}, {}, 1, {.workers = 2});
    EXPECT_EQ(res.graph.edges.size(), res.report.planned - res.report.failures.size());
    std::size_t incident = 0;
    for (const auto& e : res.graph.edges) {
        if (e.i == 5 || e.j == 5) {
            ++incident;
            EXPECT_LT(e.response, 0.2);
        } else {
            EXPECT_GT(e.response, 0.2);
        }
    }
    EXPECT_GT(incident, 0u);
}

TEST(BuildGraph, FailuresAreReportedNotThrown) {
    std::vector<Frame> feed;
    for (std::size_t k = 0; k < 4; ++k) feed.push_back(frame_from(random_texture(32, 32, k + 1), k));
    feed[2] = frame_from(GrayImage(32, 32, 0.5f), 2);  // flat: zero energy
    const BuildResult res = build_graph(feed, {}, {}, 1);
    EXPECT_EQ(res.report.planned, 6u);
    EXPECT_EQ(res.report.failures.size(), 3u);
    EXPECT_EQ(res.graph.edges.size(), 3u);
    for (const auto& f : res.report.failures) EXPECT_TRUE(f.i == "1002" || f.j == "1002");
}

TEST(BuildGraph, SmallFeedsAndMismatch) {
    EXPECT_TRUE(build_graph({}, {}, {}, 1).graph.edges.empty());
    std::vector<Frame> one{frame_from(random_texture(16, 16, 1), 0)};
    EXPECT_TRUE(build_graph(one, {}, {}, 1).graph.edges.empty());
    one.push_back(frame_from(random_texture(16, 20, 1), 1));
    EXPECT_THROW(build_graph(one, {}, {}, 1), Error);
}

TEST(BuildGraph, WorkerCountDoesNotChangeResult) {
    SceneRecipe sc;
    sc.width = sc.height = 64;
    std::vector<Frame> feed;
    for (std::size_t k = 0; k < 12; ++k) feed.push_back(frame_from(render_scene(sc, {1.0, 0.0, double(k), 0.0}), k));
    GraphParams p;
    p.batch_size = 5;
    const auto serial = build_graph(feed, p, {}, 9, {.workers = 1});
    const auto parallel = build_graph(feed, p, {}, 9, {.workers = 3});
    ASSERT_EQ(serial.graph.edges.size(), parallel.graph.edges.size());
    for (std::size_t k = 0; k < serial.graph.edges.size(); ++k) {
        EXPECT_EQ(serial.graph.edges[k].i, parallel.graph.edges[k].i);
        EXPECT_EQ(serial.graph.edges[k].j, parallel.graph.edges[k].j);
        EXPECT_EQ(serial.graph.edges[k].transform, parallel.graph.edges[k].transform);
        EXPECT_EQ(serial.graph.edges[k].response, parallel.graph.edges[k].response);
    }
}

TEST(GraphFile, RoundTrip) {
    Rng rng(31);
    TransformGraph g = random_graph(rng);
    while (g.edges.empty()) g = random_graph(rng);
    g.params.threshold = 0.5;
    g.sampling_seed = 99;
    TempDir dir("graph");
    write_graph(g, dir / "g.jsonl");
    const TransformGraph back = read_graph(dir / "g.jsonl");
    ASSERT_EQ(back.frames.size(), g.frames.size());
    ASSERT_EQ(back.edges.size(), g.edges.size());
    for (std::size_t k = 0; k < g.frames.size(); ++k) {
        EXPECT_EQ(back.frames[k].frame_id, g.frames[k].frame_id);
        EXPECT_EQ(back.frames[k].timestamp, g.frames[k].timestamp);
    }
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        EXPECT_EQ(back.edges[k].i, g.edges[k].i);
        EXPECT_EQ(back.edges[k].j, g.edges[k].j);
        EXPECT_EQ(back.edges[k].transform, g.edges[k].transform);
        EXPECT_EQ(back.edges[k].response, g.edges[k].response);
    }
    EXPECT_EQ(back.params.threshold, 0.5);
    EXPECT_EQ(back.sampling_seed, 99u);

    // Writing the read-back graph reproduces the file byte for byte.
    write_graph(back, dir / "g2.jsonl");
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(dir / "g.jsonl"), slurp(dir / "g2.jsonl"));

    EXPECT_THROW(read_graph(dir / "absent.jsonl"), Error);
    std::ofstream(dir / "bad.jsonl") << "{not json\n";
    EXPECT_THROW(read_graph(dir / "bad.jsonl"), Error);
}
