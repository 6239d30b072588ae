#include "roadlabel/chaingraph.hpp"

#include "roadlabel/error.hpp"
#include "roadlabel/rng.hpp"
#include "roadlabel/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <list>
#include <mutex>
#include <numeric>
#include <queue>
#include <thread>
#include <unordered_map>

namespace roadlabel {

void GraphParams::validate() const {
    if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "gamma must lie in (0, 1)");
    if (max_batch_distance < 0) throw Error(ErrorKind::Config, "max_batch_distance must be >= 0");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(ErrorKind::Config, "threshold must lie in [0, 1]");
}

std::string_view to_string(ChainStatus s) {
    switch (s) {
    case ChainStatus::Ok: return "ok";
    case ChainStatus::Filtered: return "filtered";
    case ChainStatus::Unreachable: return "unreachable";
    }
    return "unknown";
}

std::vector<FramePair> plan_pairs(std::span<const FrameNode> frames, int batch_size, double gamma,
                                  int max_batch_distance, std::uint64_t seed) {
    GraphParams{batch_size, gamma, max_batch_distance, 0.45}.validate();
    for (std::size_t k = 1; k < frames.size(); ++k)
        if (frames[k].timestamp < frames[k - 1].timestamp)
            throw Error(ErrorKind::Validation, "plan_pairs requires frames sorted by timestamp");

    std::vector<FramePair> plan;
    const std::size_t n = frames.size();
    const std::size_t bs = static_cast<std::size_t>(batch_size);
    const std::size_t n_batches = (n + bs - 1) / bs;
    auto batch_begin = [&](std::size_t b) { return b * bs; };
    auto batch_end = [&](std::size_t b) { return std::min(n, (b + 1) * bs); };

    for (std::size_t b = 0; b < n_batches; ++b)
        for (std::size_t i = batch_begin(b); i < batch_end(b); ++i)
            for (std::size_t j = i + 1; j < batch_end(b); ++j) plan.push_back({i, j});

    for (int d = 1; d <= max_batch_distance; ++d) {
        std::vector<FramePair> candidates;
        for (std::size_t b = 0; b + d < n_batches; ++b)
            for (std::size_t i = batch_begin(b); i < batch_end(b); ++i)
                for (std::size_t j = batch_begin(b + d); j < batch_end(b + d); ++j)
                    candidates.push_back({i, j});
        if (candidates.empty()) break;

        // The epsilon keeps exact products (e.g. gamma = 0.5) from rounding up.
        const double wanted = std::pow(gamma, d) * static_cast<double>(candidates.size());
        const auto take = std::min(candidates.size(), static_cast<std::size_t>(std::ceil(wanted - 1e-9)));

        Rng rng(splitmix64(seed ^ (0x5851F42D4C957F2Dull * static_cast<std::uint64_t>(d))));
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng.below(candidates.size() - k));
            std::swap(candidates[k], candidates[pick]);
        }
        plan.insert(plan.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(plan.begin(), plan.end());
    return plan;
}

std::optional<std::size_t> TransformGraph::index_of(std::string_view frame_id) const {
    for (std::size_t k = 0; k < frames.size(); ++k)
        if (frames[k].frame_id == frame_id) return k;
    return std::nullopt;
}

namespace {

// Bounded LRU of per-frame spectra, shared between registration workers.
class PreparedCache {
public:
    PreparedCache(std::span<const Frame> frames, const FMParams& fm, std::size_t budget_bytes)
        : frames_(frames), fm_(fm) {
        const std::size_t per_frame =
            frames.empty() ? 1 : static_cast<std::size_t>(frames[0].width) * frames[0].height * 24;
        capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, per_frame));
    }

    std::shared_ptr<const PreparedImage> get(std::size_t index) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(index); it != entries_.end()) {
                order_.splice(order_.begin(), order_, it->second.second);
                return it->second.first;
            }
        }
        auto prepared = std::make_shared<const PreparedImage>(to_gray(frames_[index]), fm_);
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(index); it != entries_.end()) return it->second.first;
        order_.push_front(index);
        entries_.emplace(index, std::make_pair(prepared, order_.begin()));
        while (entries_.size() > capacity_) {
            entries_.erase(order_.back());
            order_.pop_back();
        }
        return prepared;
    }

private:
    std::span<const Frame> frames_;
    FMParams fm_;
    std::size_t capacity_ = 2;
    std::mutex mutex_;
    std::list<std::size_t> order_;
    std::unordered_map<std::size_t,
                       std::pair<std::shared_ptr<const PreparedImage>, std::list<std::size_t>::iterator>>
        entries_;
};

struct PairOutcome {
    std::optional<RegistrationResult> result;
    std::string error;
};

}  // namespace

BuildResult build_graph(std::span<const Frame> feed, const GraphParams& params, const FMParams& fm,
                        std::uint64_t seed, const BuildOptions& options) {
    params.validate();
    fm.validate();

    std::vector<Frame> frames(feed.begin(), feed.end());
    std::stable_sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.frame_id < b.frame_id;
    });
    for (const Frame& f : frames) {
        f.validate();
        if (f.width != frames.front().width || f.height != frames.front().height)
            throw Error(ErrorKind::DimensionMismatch,
                        "frame " + f.frame_id + " differs in size from the rest of the feed");
    }

    BuildResult out;
    TransformGraph& g = out.graph;
    g.params = params;
    g.fm = fm;
    g.sampling_seed = seed;
    for (const Frame& f : frames) g.frames.push_back({f.frame_id, f.timestamp});

    const std::vector<FramePair> plan =
        plan_pairs(g.frames, params.batch_size, params.gamma, params.max_batch_distance, seed);
    out.report.planned = plan.size();

    std::vector<PairOutcome> outcomes(plan.size());
    PreparedCache cache(frames, fm, options.cache_bytes);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    auto worker = [&] {
        for (std::size_t k = next++; k < plan.size(); k = next++) {
            try {
                const auto src = cache.get(plan[k].i);
                const auto dst = cache.get(plan[k].j);
                outcomes[k].result = register_prepared(*src, *dst, fm);
            } catch (const std::exception& e) {
                outcomes[k].error = e.what();
            }
            const std::size_t finished = ++done;
            if (options.progress) {
                std::lock_guard lock(progress_mutex);
                options.progress(finished, plan.size());
            }
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(plan.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& [i, j] = plan[k];
        const PairOutcome& o = outcomes[k];
        if (!o.result) {
            out.report.failures.push_back({g.frames[i].frame_id, g.frames[j].frame_id, o.error});
        } else if (!(o.result->response > 0.0)) {
            out.report.failures.push_back({g.frames[i].frame_id, g.frames[j].frame_id, "zero response"});
        } else {
            g.edges.push_back({i, j, o.result->transform, std::min(1.0, o.result->response)});
        }
    }
    return out;
}

namespace {

struct Label {
    double cost = std::numeric_limits<double>::infinity();
    std::size_t hops = 0;
    std::vector<std::size_t> path;
    bool reached = false;
};

bool same_cost(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

struct Adjacent {
    std::size_t to;
    std::size_t edge;
};

// Max-product labels for every node, from one search rooted at the reference.
std::vector<Label> search_from(const TransformGraph& g, std::size_t root) {
    std::vector<std::vector<Adjacent>> adj(g.frames.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        if (!(edge.response > 0.0)) continue;
        adj[edge.i].push_back({edge.j, e});
        adj[edge.j].push_back({edge.i, e});
    }

    auto path_less = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](std::size_t x, std::size_t y) {
            return g.frames[x].frame_id < g.frames[y].frame_id;
        });
    };
    auto better = [&](double cost, std::size_t hops, const std::vector<std::size_t>& path, const Label& cur) {
        if (!cur.reached) return true;
        if (!same_cost(cost, cur.cost)) return cost < cur.cost;
        if (hops != cur.hops) return hops < cur.hops;
        return path_less(path, cur.path);
    };

    std::vector<Label> labels(g.frames.size());
    std::vector<std::size_t> version(g.frames.size(), 0);
    using Entry = std::tuple<double, std::size_t, std::size_t, std::size_t>;  // cost, hops, node, version
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

    labels[root] = {0.0, 0, {root}, true};
    queue.emplace(0.0, 0, root, 0);
    while (!queue.empty()) {
        const auto [cost, hops, node, ver] = queue.top();
        queue.pop();
        if (ver != version[node]) continue;
        for (const Adjacent& a : adj[node]) {
            const double w = -std::log(g.edges[a.edge].response);
            const double next_cost = labels[node].cost + w;
            std::vector<std::size_t> next_path = labels[node].path;
            next_path.push_back(a.to);
            if (better(next_cost, hops + 1, next_path, labels[a.to])) {
                labels[a.to] = {next_cost, hops + 1, std::move(next_path), true};
                queue.emplace(next_cost, hops + 1, a.to, ++version[a.to]);
            }
        }
    }
    return labels;
}

const RegistrationEdge& edge_between(const TransformGraph& g,
                                     const std::vector<std::vector<std::size_t>>& by_node,
                                     std::size_t a, std::size_t b) {
    const RegistrationEdge* best = nullptr;
    for (std::size_t e : by_node[a]) {
        const auto& edge = g.edges[e];
        if ((edge.i == a && edge.j == b) || (edge.i == b && edge.j == a))
            if (!best || edge.response > best->response) best = &edge;
    }
    return *best;
}

ChainResult materialize(const TransformGraph& g, const std::vector<std::vector<std::size_t>>& by_node,
                        const Label& label, std::size_t target, double threshold) {
    ChainResult r;
    r.target_frame_id = g.frames[target].frame_id;
    if (!label.reached) return r;
    r.product = 1.0;
    for (std::size_t k = 0; k < label.path.size(); ++k) {
        r.path.push_back(g.frames[label.path[k]].frame_id);
        if (k == 0) continue;
        const std::size_t a = label.path[k - 1];
        const std::size_t b = label.path[k];
        const RegistrationEdge& e = edge_between(g, by_node, a, b);
        r.product *= e.response;
        r.composed = compose(r.composed, e.i == a ? e.transform : invert(e.transform));
    }
    r.status = r.product < threshold ? ChainStatus::Filtered : ChainStatus::Ok;
    return r;
}

std::vector<std::vector<std::size_t>> edges_by_node(const TransformGraph& g) {
    std::vector<std::vector<std::size_t>> by_node(g.frames.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        by_node[g.edges[e].i].push_back(e);
        by_node[g.edges[e].j].push_back(e);
    }
    return by_node;
}

std::size_t require_index(const TransformGraph& g, std::string_view id) {
    const auto idx = g.index_of(id);
    if (!idx) throw Error(ErrorKind::UnknownFrame, "unknown frame id: " + std::string(id));
    return *idx;
}

}  // namespace

ChainResult optimal_chain(const TransformGraph& g, std::string_view reference, std::string_view target,
                          double threshold) {
    const std::size_t root = require_index(g, reference);
    const std::size_t dst = require_index(g, target);
    const auto labels = search_from(g, root);
    return materialize(g, edges_by_node(g), labels[dst], dst, threshold);
}

std::vector<ChainResult> chain_all(const TransformGraph& g, std::string_view reference, double threshold) {
    const std::size_t root = require_index(g, reference);
    const auto labels = search_from(g, root);
    const auto by_node = edges_by_node(g);
    std::vector<ChainResult> out;
    out.reserve(g.frames.size());
    for (std::size_t k = 0; k < g.frames.size(); ++k)
        if (k != root) out.push_back(materialize(g, by_node, labels[k], k, threshold));
    return out;
}

void write_graph(const TransformGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write graph file " + path.string());
    nlohmann::json header = {{"record", "header"},
                             {"format", "roadlabel-graph/1"},
                             {"params", g.params},
                             {"fm", g.fm},
                             {"seed", g.sampling_seed}};
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : g.frames) frames.push_back({{"id", f.frame_id}, {"timestamp", f.timestamp}});
    header["frames"] = std::move(frames);
    out << header.dump() << '\n';
    for (const auto& e : g.edges) {
        nlohmann::json rec = {{"i", g.frames[e.i].frame_id},
                              {"j", g.frames[e.j].frame_id},
                              {"s", e.transform.scale},
                              {"theta", e.transform.rotation},
                              {"tx", e.transform.tx},
                              {"ty", e.transform.ty},
                              {"r", e.response}};
        out << rec.dump() << '\n';
    }
    if (!out) throw Error(ErrorKind::Io, "failed writing graph file " + path.string());
}

TransformGraph read_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read graph file " + path.string());
    TransformGraph g;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_map<std::string, std::size_t> index;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto rec = nlohmann::json::parse(line);
            if (line_no == 1) {
                if (rec.value("format", "") != "roadlabel-graph/1")
                    throw Error(ErrorKind::Config, "not a graph file: " + path.string());
                g.params = rec.at("params").get<GraphParams>();
                g.fm = rec.at("fm").get<FMParams>();
                g.sampling_seed = rec.at("seed").get<std::uint64_t>();
                for (const auto& f : rec.at("frames")) {
                    index[f.at("id").get<std::string>()] = g.frames.size();
                    g.frames.push_back({f.at("id").get<std::string>(), f.at("timestamp").get<std::int64_t>()});
                }
                continue;
            }
            RegistrationEdge e;
            const auto i = index.find(rec.at("i").get<std::string>());
            const auto j = index.find(rec.at("j").get<std::string>());
            if (i == index.end() || j == index.end())
                throw Error(ErrorKind::Config, "edge on line " + std::to_string(line_no) + " names an unknown frame");
            e.i = i->second;
            e.j = j->second;
            e.transform = {rec.at("s").get<double>(), rec.at("theta").get<double>(), rec.at("tx").get<double>(),
                           rec.at("ty").get<double>()};
            e.response = rec.at("r").get<double>();
            g.edges.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "malformed graph file " + path.string() + " line " +
                                           std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 0) throw Error(ErrorKind::Config, "empty graph file " + path.string());
    return g;
}

void write_chains(std::span<const ChainResult> chains, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write chain file " + path.string());
    for (const auto& c : chains) out << nlohmann::json(c).dump() << '\n';
    if (!out) throw Error(ErrorKind::Io, "failed writing chain file " + path.string());
}

}  // namespace roadlabel
