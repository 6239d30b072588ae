#include "roadlabel/error.hpp"
#include "roadlabel/ingest.hpp"

#include "support.hpp"

// Must match the library's build of httplib, or the two copies of its
// inline classes disagree on layout.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <opencv2/imgcodecs.hpp>

#include <fstream>
#include <set>

using namespace roadlabel;
using namespace roadlabel::testing;
using namespace std::chrono_literals;

namespace {

std::string jpeg_body(std::uint64_t seed) {
    const GrayImage g = random_texture(24, 16, seed);
    cv::Mat m(g.height(), g.width(), CV_8UC1);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(g.at(x, y) * 255);
    std::vector<std::uint8_t> buf;
    cv::imencode(".jpg", m, buf);
    return std::string(buf.begin(), buf.end());
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> lines(const std::filesystem::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// Local server with a handful of fixed behaviors.
class TestServer {
public:
    TestServer() {
        server_.Get("/ok.jpg", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            last_header_ = req.get_header_value("X-Api-Key");
            res.set_content(jpeg_body(1), "image/jpeg");
        });
        server_.Get("/missing.jpg", [this](const httplib::Request&, httplib::Response& res) {
            ++hits_;
            res.status = 404;
        });
        server_.Get("/html", [this](const httplib::Request&, httplib::Response& res) {
            ++hits_;
            res.set_content("<html>maintenance</html>", "text/html");
        });
        server_.Get("/flaky.jpg", [this](const httplib::Request&, httplib::Response& res) {
            if (++hits_ < 3) {
                res.status = 503;
                return;
            }
            res.set_content(jpeg_body(2), "image/jpeg");
        });
        server_.Get("/down.jpg", [this](const httplib::Request&, httplib::Response& res) {
            ++hits_;
            res.status = 500;
        });
        server_.Get(R"(/cam/(\w+)/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            last_path_ = req.path;
            res.set_content(jpeg_body(std::stoull(req.matches[2])), "image/jpeg");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
    int hits() const { return hits_; }
    std::string last_header() const { return last_header_; }
    std::string last_path() const { return last_path_; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> hits_{0};
    std::string last_header_, last_path_;
};

FeedSource source(const std::string& cam, const std::string& url) {
    FeedSource s;
    s.camera_id = cam;
    s.url_template = url;
    return s;
}

struct RecordingSleeper {
    std::vector<std::chrono::milliseconds> calls;
    Sleeper fn() {
        return [this](std::chrono::milliseconds d) { calls.push_back(d); };
    }
};

// Serves a fixed sequence of responses, repeating the last.
class ScriptedFetcher : public Fetcher {
public:
    explicit ScriptedFetcher(std::vector<HttpResponse> script) : script_(std::move(script)) {}
    HttpResponse get(const std::string&, const std::map<std::string, std::string>&) override {
        const auto k = std::min(calls_++, script_.size() - 1);
        return script_[k];
    }
    std::size_t calls() const { return calls_; }

private:
    std::vector<HttpResponse> script_;
    std::size_t calls_ = 0;
};

}  // namespace

TEST(Poll, StoresJpegAndAppendsManifest) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    FeedSource src = source("c1", server.url("/ok.jpg"));
    src.headers["X-Api-Key"] = "secret";
    const PollResult r = poll_once(src, *fetcher, store, 1700000000);
    ASSERT_TRUE(r.stored) << (r.failure ? r.failure->error : "");
    EXPECT_EQ(r.stored->path, "1700000000.jpg");
    EXPECT_FALSE(r.stored->duplicate);
    EXPECT_EQ(slurp(root / "c1/1700000000.jpg"), jpeg_body(1));
    EXPECT_EQ(server.last_header(), "secret");
    const auto manifest = read_manifest(root.path(), "c1");
    ASSERT_EQ(manifest.size(), 1u);
    EXPECT_EQ(manifest[0].timestamp, 1700000000);
    const std::string body = jpeg_body(1);
    EXPECT_EQ(manifest[0].sha256, sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size())));
    EXPECT_FALSE(std::filesystem::exists(root / "c1/1700000000.jpg.part"));
}

TEST(Poll, NotFoundIsAFailureWithoutRetry) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    RecordingSleeper sleeper;
    const PollResult r = poll_once(source("c1", server.url("/missing.jpg")), *fetcher, store, 10, {}, sleeper.fn());
    ASSERT_TRUE(r.failure);
    EXPECT_FALSE(r.stored);
    EXPECT_EQ(r.failure->status, 404);
    EXPECT_EQ(r.failure->attempts, 1);
    EXPECT_EQ(server.hits(), 1);
    EXPECT_TRUE(sleeper.calls.empty());
    EXPECT_FALSE(std::filesystem::exists(root / "c1/10.jpg"));
    const auto log = lines(root / "c1/failures.jsonl");
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(nlohmann::json::parse(log[0])["status"], 404);
}

TEST(Poll, DuplicateBodyIsStoredAndFlagged) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    const FeedSource src = source("c1", server.url("/ok.jpg"));
    ASSERT_TRUE(poll_once(src, *fetcher, store, 100).stored);
    const PollResult second = poll_once(src, *fetcher, store, 1300);
    ASSERT_TRUE(second.stored);
    EXPECT_TRUE(second.stored->duplicate);
    EXPECT_TRUE(std::filesystem::exists(root / "c1/1300.jpg"));
    const auto log = lines(root / "c1/manifest.jsonl");
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(nlohmann::json::parse(log[1])["flags"], nlohmann::json::array({"duplicate"}));
    EXPECT_EQ(nlohmann::json::parse(log[0])["flags"], nlohmann::json::array());
}

TEST(Poll, NonImageBodyIsAFailure) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    const PollResult r = poll_once(source("c1", server.url("/html")), *fetcher, store, 5);
    ASSERT_TRUE(r.failure);
    EXPECT_EQ(r.failure->status, 200);
    EXPECT_NE(r.failure->error.find("image"), std::string::npos);
    EXPECT_TRUE(read_manifest(root.path(), "c1").empty());
}

TEST(Poll, TransientErrorsRetryWithBackoff) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    RecordingSleeper sleeper;
    const PollResult ok = poll_once(source("c1", server.url("/flaky.jpg")), *fetcher, store, 7, {}, sleeper.fn());
    ASSERT_TRUE(ok.stored);
    EXPECT_EQ(server.hits(), 3);
    EXPECT_EQ(sleeper.calls, (std::vector<std::chrono::milliseconds>{2000ms, 4000ms}));

    RecordingSleeper again;
    const PollResult down = poll_once(source("c2", server.url("/down.jpg")), *fetcher, store, 7, {3, 100ms}, again.fn());
    ASSERT_TRUE(down.failure);
    EXPECT_EQ(down.failure->attempts, 3);
    EXPECT_EQ(down.failure->status, 500);
    EXPECT_EQ(again.calls, (std::vector<std::chrono::milliseconds>{100ms, 200ms}));
}

TEST(Poll, ConnectionErrorIsRecordedNotThrown) {
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(1s);
    RecordingSleeper sleeper;
    // Port 1 on loopback refuses connections.
    const PollResult r = poll_once(source("c1", "http://127.0.0.1:1/x.jpg"), *fetcher, store, 3, {2, 10ms}, sleeper.fn());
    ASSERT_TRUE(r.failure);
    EXPECT_EQ(r.failure->status, 0);
    EXPECT_EQ(r.failure->attempts, 2);
    EXPECT_FALSE(r.failure->error.empty());

    ScriptedFetcher throwing({HttpResponse{0, {}, "boom"}});
    EXPECT_NO_THROW(poll_once(source("c1", "http://x/y"), throwing, store, 4, {1, 0ms}, sleeper.fn()));
}

TEST(Poll, UrlTemplateExpansion) {
    TestServer server;
    TempDir root("ingest");
    FeedStore store(root.path());
    auto fetcher = make_http_fetcher(5s);
    const FeedSource src = source("C42", server.url("/cam/{camera_id}/{timestamp}"));
    EXPECT_EQ(src.url_for(99), server.url("/cam/C42/99"));
    ASSERT_TRUE(poll_once(src, *fetcher, store, 99).stored);
    EXPECT_EQ(server.last_path(), "/cam/C42/99");
}

TEST(Store, ResumesWithoutDuplicatingTimestamps) {
    TempDir root("ingest");
    ScriptedFetcher fetcher({HttpResponse{200, jpeg_body(3), {}}});
    const FeedSource src = source("c1", "http://unused/");
    {
        FeedStore store(root.path());
        ASSERT_TRUE(poll_once(src, fetcher, store, 100).stored);
        ASSERT_TRUE(poll_once(src, fetcher, store, 200).stored);
    }
    // Simulate a crash halfway through writing a manifest line.
    std::ofstream(root / "c1/manifest.jsonl", std::ios::app) << "{\"camera_id\":\"c1\",\"times";

    FeedStore restarted(root.path());
    EXPECT_TRUE(restarted.has_timestamp("c1", 100));
    EXPECT_EQ(restarted.last_timestamp("c1"), 200);
    const auto calls = fetcher.calls();
    EXPECT_TRUE(poll_once(src, fetcher, restarted, 200).skipped());
    EXPECT_EQ(fetcher.calls(), calls);
    const std::string body = jpeg_body(4);
    EXPECT_THROW(restarted.store("c1", 100, std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size())),
                 Error);
    EXPECT_FALSE(restarted.last_timestamp("other"));
}

TEST(Store, PngBodiesKeepTheirExtension) {
    TempDir root("ingest");
    TempDir tmp("png");
    save_frame_png(to_frame(random_texture(8, 8, 1)), tmp / "a.png");
    const std::string png = slurp(tmp / "a.png");
    FeedStore store(root.path());
    const StoredFrame f = store.store("c", 5, std::span(reinterpret_cast<const std::uint8_t*>(png.data()), png.size()));
    EXPECT_EQ(f.path, "5.png");
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, ParsesAndValidates) {
    TempDir dir("cfg");
    std::ofstream(dir / "ingest.json") << R"({"ingest": {
        "root": "frames",
        "retry": {"attempts": 4, "base_delay_ms": 500},
        "sources": [
          {"camera_id": "C1", "url": "https://example.test/{camera_id}.jpg"},
          {"camera_id": "C2", "url": "https://example.test/b.jpg", "poll_interval": 60,
           "privacy_masked": true, "headers": {"Accept": "image/jpeg"}}
        ]}})";
    const IngestConfig c = load_ingest_config(dir / "ingest.json");
    ASSERT_EQ(c.sources.size(), 2u);
    EXPECT_EQ(c.sources[0].poll_interval, 1200);
    EXPECT_TRUE(c.sources[0].active());
    EXPECT_FALSE(c.sources[1].active());
    EXPECT_EQ(c.sources[1].headers.at("Accept"), "image/jpeg");
    EXPECT_EQ(c.retry.attempts, 4);
    EXPECT_EQ(c.retry.base_delay, 500ms);

    IngestConfig dup = c;
    dup.sources[1].camera_id = "C1";
    EXPECT_THROW(dup.validate(), Error);
    IngestConfig fast = c;
    fast.sources[0].poll_interval = 0;
    EXPECT_THROW(fast.validate(), Error);

    std::ofstream(dir / "bad.json") << "{\"ingest\": {\"sources\": [{\"camera_id\": 5}]}}";
    try {
        load_ingest_config(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
}

TEST(Scheduler, PollsActiveSourcesOnInterval) {
    TempDir root("sched");
    IngestConfig cfg;
    cfg.root = root.path();
    cfg.retry = {1, 10ms};
    FeedSource a = source("a", "http://unused/a");
    a.poll_interval = 1;
    FeedSource masked = source("m", "http://unused/m");
    masked.privacy_masked = true;
    cfg.sources = {a, masked};
    std::atomic<int> seed{10};
    Scheduler sched(cfg, [&] {
        return std::make_unique<ScriptedFetcher>(std::vector<HttpResponse>{HttpResponse{200, jpeg_body(seed++), {}}});
    });
    sched.start();
    std::this_thread::sleep_for(2500ms);
    sched.stop();
    sched.stop();
    EXPECT_GE(sched.polls(), 2u);
    EXPECT_LE(sched.polls(), 4u);
    const auto stored = read_manifest(root.path(), "a");
    std::set<std::int64_t> ts;
    for (const auto& f : stored) ts.insert(f.timestamp);
    EXPECT_EQ(ts.size(), stored.size());
    EXPECT_GE(stored.size(), 2u);
    EXPECT_FALSE(std::filesystem::exists(root / "m"));
}

TEST(Subsample, FullScaleCount) {
    std::vector<StoredFrame> frames;
    for (int k = 0; k < 7000; ++k) frames.push_back({"cam", 1000 + k, std::to_string(k) + ".jpg", "", false});
    for (int k = 0; k < 35; ++k) frames.push_back({"other", 1000 + k, std::to_string(k) + ".jpg", "", false});
    const auto picked = subsample(frames, 0.1, 1);
    std::size_t cam = 0, other = 0;
    for (const auto& f : picked) (f.camera_id == "cam" ? cam : other)++;
    EXPECT_EQ(cam, 700u);
    EXPECT_EQ(other, 4u);  // round(3.5) away from zero
    // A subset of the input, in input order, without repeats.
    std::set<std::pair<std::string, std::int64_t>> all, seen;
    for (const auto& f : frames) all.insert({f.camera_id, f.timestamp});
    for (const auto& f : picked) {
        EXPECT_TRUE(all.contains({f.camera_id, f.timestamp}));
        EXPECT_TRUE(seen.insert({f.camera_id, f.timestamp}).second);
    }
    std::vector<std::string> ids;
    for (const auto& f : frames) ids.push_back(f.camera_id);
    const auto idx = subsample_indices(ids, 0.1, 1);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    ASSERT_EQ(idx.size(), picked.size());
    for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(frames[idx[k]].timestamp, picked[k].timestamp);
}

TEST(Subsample, IdentityDeterminismAndSeeds) {
    std::vector<std::string> ids(500, "x");
    std::vector<std::size_t> every(500);
    std::iota(every.begin(), every.end(), 0);
    EXPECT_EQ(subsample_indices(ids, 1.0, 3), every);
    EXPECT_EQ(subsample_indices(ids, 0.25, 3), subsample_indices(ids, 0.25, 3));
    EXPECT_NE(subsample_indices(ids, 0.25, 3), subsample_indices(ids, 0.25, 4));
    EXPECT_EQ(subsample_indices(ids, 0.25, 3).size(), 125u);
    EXPECT_THROW(subsample_indices(ids, 0.0, 1), Error);
    EXPECT_THROW(subsample_indices(ids, 1.5, 1), Error);
    EXPECT_TRUE(subsample_indices({}, 0.5, 1).empty());

    std::vector<Frame> frames;
    for (int k = 0; k < 20; ++k) frames.push_back({"c", std::to_string(k), k, 1, 1, 1, {0}});
    EXPECT_EQ(subsample(frames, 0.5, 9).size(), 10u);
}
