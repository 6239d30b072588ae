#pragma once

#include "roadlabel/imgcore.hpp"
#include "roadlabel/registration.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace roadlabel {

/// Transform-graph constants. Defaults: batches of 24 frames, pair sampling
/// proportion gamma^d with gamma = 1/1.35, nothing beyond 8 batches apart,
/// chains below a response product of 0.45 are filtered.
struct GraphParams {
    int batch_size = 24;
    double gamma = 1.0 / 1.35;
    int max_batch_distance = 8;
    double threshold = 0.45;

    void validate() const;
};

struct FrameNode {
    std::string frame_id;
    std::int64_t timestamp = 0;
};

/// Indices into the timestamp-ordered frame list, i < j.
struct FramePair {
    std::size_t i = 0;
    std::size_t j = 0;

    friend bool operator==(const FramePair&, const FramePair&) = default;
    friend auto operator<=>(const FramePair&, const FramePair&) = default;
};

/// All within-batch pairs plus ceil(gamma^d * N_d) seeded uniform samples of
/// the N_d pairs at every batch distance 1 <= d <= max_batch_distance.
/// Frames must already be sorted by timestamp. Output is sorted.
std::vector<FramePair> plan_pairs(std::span<const FrameNode> frames, int batch_size, double gamma,
                                  int max_batch_distance, std::uint64_t seed);

/// transform maps frame i's coordinates to frame j's. Stored once per pair.
struct RegistrationEdge {
    std::size_t i = 0;
    std::size_t j = 0;
    SimilarityTransform transform;
    double response = 0.0;
};

struct TransformGraph {
    std::vector<FrameNode> frames;  // sorted by timestamp
    std::vector<RegistrationEdge> edges;
    GraphParams params;
    FMParams fm;
    std::uint64_t sampling_seed = 0;

    std::optional<std::size_t> index_of(std::string_view frame_id) const;
};

struct PairFailure {
    std::string i;
    std::string j;
    std::string reason;
};

struct BuildReport {
    std::size_t planned = 0;
    std::vector<PairFailure> failures;
};

struct BuildResult {
    TransformGraph graph;
    BuildReport report;
};

struct BuildOptions {
    unsigned workers = 1;
    /// Upper bound on memory held by cached per-frame spectra.
    std::size_t cache_bytes = std::size_t{1} << 30;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Registers every planned pair of the feed. Frames are ordered by
/// (timestamp, frame_id); all must share dimensions.
BuildResult build_graph(std::span<const Frame> feed, const GraphParams& params, const FMParams& fm,
                        std::uint64_t seed, const BuildOptions& options = {});

enum class ChainStatus { Ok, Filtered, Unreachable };

std::string_view to_string(ChainStatus s);

struct ChainResult {
    std::string target_frame_id;
    std::vector<std::string> path;  // reference first, target last
    SimilarityTransform composed;   // reference coordinates -> target coordinates
    double product = 0.0;
    ChainStatus status = ChainStatus::Unreachable;

    std::size_t hops() const { return path.empty() ? 0 : path.size() - 1; }
};

/// Maximum-product chain from reference to target, found as the shortest
/// path under edge weights -ln r. Ties go to fewer hops, then to the
/// lexicographically smaller frame-id sequence. Throws UnknownFrame.
ChainResult optimal_chain(const TransformGraph& g, std::string_view reference,
                          std::string_view target, double threshold = 0.45);

/// One result per non-reference frame, in frame order, from a single search.
std::vector<ChainResult> chain_all(const TransformGraph& g, std::string_view reference,
                                   double threshold = 0.45);

// Newline-delimited persistence: one header record, then one edge per line.
void write_graph(const TransformGraph& g, const std::filesystem::path& path);
TransformGraph read_graph(const std::filesystem::path& path);

void write_chains(std::span<const ChainResult> chains, const std::filesystem::path& path);

}  // namespace roadlabel
