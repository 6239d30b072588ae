#pragma once

#include "roadlabel/chaingraph.hpp"
#include "roadlabel/error.hpp"
#include "roadlabel/ingest.hpp"
#include "roadlabel/registration.hpp"
#include "roadlabel/synthbench.hpp"
#include "roadlabel/transfer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace roadlabel::cli {

/// Exit codes: 0 ok, 2 config, 3 I/O, 4 dimension or validation,
/// 5 registration or graph failure, 1 anything unexpected.
int exit_code(ErrorKind kind);

/// Everything a run needs besides its positional arguments. Loaded from one
/// JSON file; command-line flags override individual fields.
struct PipelineConfig {
    std::filesystem::path data_root = "data";
    std::filesystem::path output_root = "out";
    FMParams fm;
    GraphParams graph;
    std::uint64_t graph_seed = 7;
    std::uint64_t subsample_seed = 1;
    double subsample = 1.0;
    unsigned workers = 1;
    std::optional<IngestConfig> ingest;
};

/// Throws Io when unreadable, Config when malformed.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// On-disk feed: `<id>.png|jpg` frames (id = unix timestamp), one
/// `<id>.mask.png` manual label marking the reference frame, optional
/// `<id>.exclude.png` exclusion masks. Other files are ignored.
struct FeedDir {
    Feed feed;
    FeedAnnotation annotation;
};

FeedDir load_feed_dir(const std::filesystem::path& dir, const std::string& camera_id);

/// A directory of camera subdirectories, or a single feed directory.
/// Cameras come back sorted by id.
std::vector<FeedDir> load_feeds(const std::filesystem::path& root);

/// Writes a synthetic feed in the layout load_feed_dir reads, plus
/// `<id>.truth.png` ground-truth masks.
void write_feed_dir(const std::filesystem::path& dir, const SyntheticFeed& feed, std::size_t reference_index);

/// `<dir>/.roadlabel.lock`, created exclusively. A lock left behind by a
/// process that no longer exists is taken over. Throws Io when held.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

int run(int argc, char** argv);

}  // namespace roadlabel::cli
