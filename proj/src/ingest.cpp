#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "roadlabel/ingest.hpp"

#include "roadlabel/error.hpp"
#include "roadlabel/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <numeric>

namespace roadlabel {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

bool is_png(std::span<const std::uint8_t> body) {
    return body.size() >= 4 && body[0] == 0x89 && body[1] == 'P' && body[2] == 'N' && body[3] == 'G';
}

// Transport failures, server errors and rate limiting are worth another try;
// other client errors (404, 403, ...) will not fix themselves within seconds.
bool transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

std::span<const std::uint8_t> bytes_of(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

void append_line(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "cannot append to " + path.string());
}

class HttplibFetcher final : public Fetcher {
public:
    explicit HttplibFetcher(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) override {
        HttpResponse out;
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            out.error = "url has no scheme: " + url;
            return out;
        }
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        if (!client.is_valid()) {
            out.error = "unsupported url: " + url;
            return out;
        }
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_follow_location(true);
        httplib::Headers h(headers.begin(), headers.end());
        const auto res = client.Get(path, h);
        if (!res) {
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::string FeedSource::url_for(std::int64_t timestamp) const {
    std::string url = url_template;
    replace_all(url, "{camera_id}", camera_id);
    replace_all(url, "{timestamp}", std::to_string(timestamp));
    return url;
}

void IngestConfig::validate() const {
    std::set<std::string> seen;
    for (const auto& s : sources) {
        if (s.camera_id.empty()) throw Error(ErrorKind::Config, "source without camera_id");
        if (s.camera_id.find_first_of("/\\") != std::string::npos || s.camera_id == "." || s.camera_id == "..")
            throw Error(ErrorKind::Config, "camera_id is not a valid directory name: " + s.camera_id);
        if (s.url_template.empty()) throw Error(ErrorKind::Config, "source " + s.camera_id + " has no url");
        if (s.poll_interval < 1) throw Error(ErrorKind::Config, "poll_interval must be at least 1 s for " + s.camera_id);
        if (!seen.insert(s.camera_id).second) throw Error(ErrorKind::Config, "duplicate camera_id " + s.camera_id);
    }
    if (retry.attempts < 1) throw Error(ErrorKind::Config, "retry attempts must be at least 1");
    if (retry.base_delay.count() < 0) throw Error(ErrorKind::Config, "retry delay must be non-negative");
}

void from_json(const nlohmann::json& j, FeedSource& s) {
    s.camera_id = j.at("camera_id").get<std::string>();
    s.url_template = j.at("url").get<std::string>();
    s.poll_interval = j.value("poll_interval", 1200);
    s.enabled = j.value("enabled", true);
    s.privacy_masked = j.value("privacy_masked", false);
    s.headers = j.value("headers", std::map<std::string, std::string>{});
}

void to_json(nlohmann::json& j, const FeedSource& s) {
    j = {{"camera_id", s.camera_id},     {"url", s.url_template},
         {"poll_interval", s.poll_interval}, {"enabled", s.enabled},
         {"privacy_masked", s.privacy_masked}, {"headers", s.headers}};
}

void from_json(const nlohmann::json& j, IngestConfig& c) {
    c.root = j.value("root", c.root.string());
    c.sources = j.at("sources").get<std::vector<FeedSource>>();
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        c.retry.attempts = r.value("attempts", c.retry.attempts);
        c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", c.retry.base_delay.count()));
    }
    c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
}

IngestConfig load_ingest_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    IngestConfig c;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        // A pipeline config nests the ingest section; a bare one is accepted too.
        if (j.contains("ingest")) j = j["ingest"];
        c = j.get<IngestConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

std::unique_ptr<Fetcher> make_http_fetcher(std::chrono::seconds timeout) {
    return std::make_unique<HttplibFetcher>(timeout);
}

void to_json(nlohmann::json& j, const StoredFrame& f) {
    nlohmann::json flags = nlohmann::json::array();
    if (f.duplicate) flags.push_back("duplicate");
    j = {{"camera_id", f.camera_id}, {"timestamp", f.timestamp}, {"path", f.path},
         {"sha256", f.sha256},       {"flags", flags}};
}

void from_json(const nlohmann::json& j, StoredFrame& f) {
    f.camera_id = j.value("camera_id", std::string{});
    f.timestamp = j.at("timestamp").get<std::int64_t>();
    f.path = j.at("path").get<std::string>();
    f.sha256 = j.at("sha256").get<std::string>();
    f.duplicate = false;
    for (const auto& flag : j.value("flags", nlohmann::json::array()))
        if (flag == "duplicate") f.duplicate = true;
}

void to_json(nlohmann::json& j, const FailureRecord& f) {
    j = {{"camera_id", f.camera_id}, {"timestamp", f.timestamp}, {"url", f.url},
         {"status", f.status},       {"error", f.error},         {"attempts", f.attempts}};
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::vector<StoredFrame> read_manifest(const std::filesystem::path& root, const std::string& camera_id) {
    std::vector<StoredFrame> out;
    std::ifstream in(root / camera_id / "manifest.jsonl");
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            StoredFrame f = nlohmann::json::parse(line).get<StoredFrame>();
            if (f.camera_id.empty()) f.camera_id = camera_id;
            out.push_back(std::move(f));
        } catch (const nlohmann::json::exception&) {
            // A crash mid-append can leave a torn last line; anything else is corruption.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw Error(ErrorKind::Io, "corrupt manifest line " + std::to_string(lineno) + " for " + camera_id);
        }
    }
    return out;
}

FeedStore::FeedStore(std::filesystem::path root) : root_(std::move(root)) {}

FeedStore::Camera& FeedStore::camera(const std::string& camera_id) {
    std::lock_guard lock(cameras_mutex_);
    auto& slot = cameras_[camera_id];
    if (!slot) slot = std::make_unique<Camera>();
    return *slot;
}

void FeedStore::load(const std::string& camera_id, Camera& cam) {
    if (cam.loaded) return;
    for (const auto& f : read_manifest(root_, camera_id)) {
        cam.timestamps.insert(f.timestamp);
        cam.last_checksum = f.sha256;
    }
    cam.loaded = true;
}

bool FeedStore::has_timestamp(const std::string& camera_id, std::int64_t timestamp) {
    Camera& cam = camera(camera_id);
    std::lock_guard lock(cam.mutex);
    load(camera_id, cam);
    return cam.timestamps.contains(timestamp);
}

std::optional<std::int64_t> FeedStore::last_timestamp(const std::string& camera_id) {
    Camera& cam = camera(camera_id);
    std::lock_guard lock(cam.mutex);
    load(camera_id, cam);
    if (cam.timestamps.empty()) return std::nullopt;
    return *cam.timestamps.rbegin();
}

StoredFrame FeedStore::store(const std::string& camera_id, std::int64_t timestamp,
                             std::span<const std::uint8_t> body) {
    Camera& cam = camera(camera_id);
    std::lock_guard lock(cam.mutex);
    load(camera_id, cam);
    if (cam.timestamps.contains(timestamp))
        throw Error(ErrorKind::Validation, "timestamp " + std::to_string(timestamp) + " already stored for " + camera_id);

    namespace fs = std::filesystem;
    const fs::path dir = root_ / camera_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

    StoredFrame f;
    f.camera_id = camera_id;
    f.timestamp = timestamp;
    f.path = std::to_string(timestamp) + (is_png(body) ? ".png" : ".jpg");
    f.sha256 = sha256_hex(body);
    f.duplicate = f.sha256 == cam.last_checksum;

    // The image goes in under a temporary name first so a crash never leaves
    // a manifest line pointing at a half-written file.
    const fs::path tmp = dir / (f.path + ".part");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, dir / f.path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());

    nlohmann::json j = f;
    append_line(dir / "manifest.jsonl", j);
    cam.timestamps.insert(timestamp);
    cam.last_checksum = f.sha256;
    return f;
}

void FeedStore::record_failure(const FailureRecord& failure) {
    Camera& cam = camera(failure.camera_id);
    std::lock_guard lock(cam.mutex);
    const auto dir = root_ / failure.camera_id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json j = failure;
    append_line(dir / "failures.jsonl", j);
}

PollResult poll_once(const FeedSource& source, Fetcher& fetcher, FeedStore& store, std::int64_t timestamp,
                     const RetryPolicy& retry, const Sleeper& sleep) {
    PollResult result;
    if (store.has_timestamp(source.camera_id, timestamp)) return result;

    FailureRecord failure;
    failure.camera_id = source.camera_id;
    failure.timestamp = timestamp;
    failure.url = source.url_for(timestamp);

    const int attempts = std::max(1, retry.attempts);
    auto delay = retry.base_delay;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        failure.attempts = attempt;
        HttpResponse res;
        try {
            res = fetcher.get(failure.url, source.headers);
        } catch (const std::exception& e) {
            res = HttpResponse{0, {}, e.what()};
        }
        failure.status = res.status;
        if (res.status == 200) {
            const auto body = bytes_of(res.body);
            if (!is_decodable_image(body)) {
                failure.error = "body is not a decodable image";
                break;
            }
            try {
                result.stored = store.store(source.camera_id, timestamp, body);
                return result;
            } catch (const Error& e) {
                failure.error = e.what();
                break;
            }
        }
        failure.error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
        if (!transient(res.status) || attempt == attempts) break;
        if (sleep)
            sleep(delay);
        else
            std::this_thread::sleep_for(delay);
        delay *= 2;
    }
    try {
        store.record_failure(failure);
    } catch (const Error&) {
        // The failure log is best effort; the caller still gets the record.
    }
    result.failure = std::move(failure);
    return result;
}

Scheduler::Scheduler(IngestConfig config, FetcherFactory fetchers)
    : config_(std::move(config)), fetchers_(std::move(fetchers)), store_(config_.root) {
    config_.validate();
}

Scheduler::~Scheduler() { stop(); }

void Scheduler::start() {
    if (!threads_.empty()) return;
    for (const auto& source : config_.sources)
        if (source.active())
            threads_.emplace_back([this, &source](std::stop_token st) { run(st, source); });
}

void Scheduler::stop() {
    for (auto& t : threads_) t.request_stop();
    threads_.clear();  // jthread joins on destruction
}

void Scheduler::run(std::stop_token stop, const FeedSource& source) {
    using namespace std::chrono;
    std::mutex m;
    std::condition_variable_any cv;
    auto wait_for = [&](milliseconds d) {
        std::unique_lock lock(m);
        cv.wait_for(lock, stop, d, [] { return false; });
    };
    auto now_s = [] { return duration_cast<seconds>(system_clock::now().time_since_epoch()).count(); };

    auto fetcher = fetchers_();
    const auto last = store_.last_timestamp(source.camera_id);
    std::int64_t next_due = last ? *last + source.poll_interval : now_s();
    while (!stop.stop_requested()) {
        const std::int64_t now = now_s();
        if (now < next_due) {
            wait_for(milliseconds(std::min<std::int64_t>(1000, (next_due - now) * 1000)));
            continue;
        }
        try {
            poll_once(source, *fetcher, store_, now, config_.retry, wait_for);
        } catch (const std::exception&) {
            // Storage errors must not kill the poller; the next slot retries.
        }
        ++polls_;
        next_due = now + source.poll_interval;
    }
}

std::vector<std::size_t> subsample_indices(std::span<const std::string> camera_ids, double fraction,
                                           std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorKind::Config, "subsample fraction must be in (0, 1]");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < camera_ids.size(); ++i) groups[camera_ids[i]].push_back(i);

    std::vector<std::size_t> keep;
    for (auto& [camera, idx] : groups) {
        const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        Rng rng(seed ^ fnv1a(camera));
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

namespace {

template <typename T>
std::vector<T> subsample_by_camera(std::span<const T> items, double fraction, std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const auto& it : items) ids.push_back(it.camera_id);
    std::vector<T> out;
    for (std::size_t i : subsample_indices(ids, fraction, seed)) out.push_back(items[i]);
    return out;
}

}  // namespace

std::vector<StoredFrame> subsample(std::span<const StoredFrame> frames, double fraction, std::uint64_t seed) {
    return subsample_by_camera(frames, fraction, seed);
}

std::vector<Frame> subsample(std::span<const Frame> frames, double fraction, std::uint64_t seed) {
    return subsample_by_camera(frames, fraction, seed);
}

}  // namespace roadlabel
