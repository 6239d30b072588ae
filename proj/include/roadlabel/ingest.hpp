#pragma once

#include "roadlabel/imgcore.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace roadlabel {

/// One camera endpoint. `url_template` may contain {camera_id} and {timestamp}.
struct FeedSource {
    std::string camera_id;
    std::string url_template;
    int poll_interval = 1200;  // seconds
    bool enabled = true;
    /// Feeds whose operator blurs or masks the road are never polled.
    bool privacy_masked = false;
    std::map<std::string, std::string> headers;

    bool active() const noexcept { return enabled && !privacy_masked; }
    std::string url_for(std::int64_t timestamp) const;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{2000};  // doubled after every failed attempt
};

struct IngestConfig {
    std::filesystem::path root;
    std::vector<FeedSource> sources;
    RetryPolicy retry;
    std::chrono::seconds timeout{30};

    /// Throws Config on duplicate camera ids, empty ids/urls or poll_interval < 1.
    void validate() const;
};

void from_json(const nlohmann::json& j, FeedSource& s);
void to_json(nlohmann::json& j, const FeedSource& s);
void from_json(const nlohmann::json& j, IngestConfig& c);
IngestConfig load_ingest_config(const std::filesystem::path& path);

struct HttpResponse {
    int status = 0;  // 0: no response (connection, TLS or timeout error)
    std::string body;
    std::string error;
};

class Fetcher {
public:
    virtual ~Fetcher() = default;
    virtual HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) = 0;
};

/// Plain HTTP and HTTPS GET.
std::unique_ptr<Fetcher> make_http_fetcher(std::chrono::seconds timeout = std::chrono::seconds(30));

/// Line of `<root>/<camera_id>/manifest.jsonl`.
struct StoredFrame {
    std::string camera_id;
    std::int64_t timestamp = 0;
    std::string path;  // relative to the camera directory
    std::string sha256;
    bool duplicate = false;
};

/// Line of `<root>/<camera_id>/failures.jsonl`.
struct FailureRecord {
    std::string camera_id;
    std::int64_t timestamp = 0;
    std::string url;
    int status = 0;
    std::string error;
    int attempts = 0;
};

void to_json(nlohmann::json& j, const StoredFrame& f);
void from_json(const nlohmann::json& j, StoredFrame& f);
void to_json(nlohmann::json& j, const FailureRecord& f);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Append-only per-camera storage. Safe to share between polling threads;
/// writes to one camera are serialized. Existing manifests are picked up on
/// first use, so a restarted poller continues where it stopped.
class FeedStore {
public:
    explicit FeedStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    bool has_timestamp(const std::string& camera_id, std::int64_t timestamp);
    std::optional<std::int64_t> last_timestamp(const std::string& camera_id);

    /// Writes the body and appends the manifest line. The body must be a
    /// decodable image. Throws Validation if the timestamp is already stored.
    StoredFrame store(const std::string& camera_id, std::int64_t timestamp, std::span<const std::uint8_t> body);
    void record_failure(const FailureRecord& failure);

private:
    struct Camera {
        std::mutex mutex;
        bool loaded = false;
        std::set<std::int64_t> timestamps;
        std::string last_checksum;
    };

    Camera& camera(const std::string& camera_id);
    void load(const std::string& camera_id, Camera& cam);

    std::filesystem::path root_;
    std::mutex cameras_mutex_;
    std::map<std::string, std::unique_ptr<Camera>> cameras_;
};

std::vector<StoredFrame> read_manifest(const std::filesystem::path& root, const std::string& camera_id);

struct PollResult {
    std::optional<StoredFrame> stored;
    std::optional<FailureRecord> failure;

    /// Neither stored nor failed: the timestamp was already in the store.
    bool skipped() const noexcept { return !stored && !failure; }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// One fetch with retries. Never throws for network or HTTP problems; those
/// end up in the failure log. `sleep` defaults to std::this_thread::sleep_for.
PollResult poll_once(const FeedSource& source, Fetcher& fetcher, FeedStore& store, std::int64_t timestamp,
                     const RetryPolicy& retry = {}, const Sleeper& sleep = {});

using FetcherFactory = std::function<std::unique_ptr<Fetcher>()>;

/// One polling thread per active source. Each thread waits until
/// max(now, last stored timestamp + poll_interval) before its next poll.
class Scheduler {
public:
    Scheduler(IngestConfig config, FetcherFactory fetchers);
    ~Scheduler();

    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;

    void start();
    /// Requests stop and joins. Idempotent.
    void stop();

    std::size_t polls() const noexcept { return polls_.load(); }

private:
    void run(std::stop_token stop, const FeedSource& source);

    IngestConfig config_;
    FetcherFactory fetchers_;
    FeedStore store_;
    std::vector<std::jthread> threads_;
    std::atomic<std::size_t> polls_{0};
};

/// Per camera, keeps round(fraction * n) frames chosen uniformly without
/// replacement; the result preserves input order. 0 < fraction <= 1.
std::vector<std::size_t> subsample_indices(std::span<const std::string> camera_ids, double fraction,
                                           std::uint64_t seed);
std::vector<StoredFrame> subsample(std::span<const StoredFrame> frames, double fraction, std::uint64_t seed);
std::vector<Frame> subsample(std::span<const Frame> frames, double fraction, std::uint64_t seed);

}  // namespace roadlabel
