#include "cli.hpp"

#include "roadlabel/serialization.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <csignal>
#include <fcntl.h>
#include <fstream>
#include <map>
#include <signal.h>
#include <unistd.h>

namespace roadlabel::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::Validation:
    case ErrorKind::InvalidTransform: return 4;
    case ErrorKind::ZeroEnergy:
    case ErrorKind::DegenerateScene:
    case ErrorKind::UnknownFrame: return 5;
    }
    return 1;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
    PipelineConfig c;
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            c.data_root = p.value("data_root", c.data_root.string());
            c.output_root = p.value("output_root", c.output_root.string());
        }
        if (j.contains("fm")) c.fm = j["fm"].get<FMParams>();
        if (j.contains("graph")) c.graph = j["graph"].get<GraphParams>();
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            c.graph_seed = s.value("graph", c.graph_seed);
            c.subsample_seed = s.value("subsample", c.subsample_seed);
        }
        c.subsample = j.value("subsample", c.subsample);
        c.workers = j.value("workers", c.workers);
        if (j.contains("ingest")) {
            IngestConfig ic;
            ic.root = c.data_root;
            from_json(j["ingest"], ic);
            c.ingest = std::move(ic);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    c.fm.validate();
    c.graph.validate();
    if (c.ingest) c.ingest->validate();
    if (!(c.subsample > 0.0 && c.subsample <= 1.0)) throw Error(ErrorKind::Config, "subsample must be in (0, 1]");
    if (c.workers < 1) throw Error(ErrorKind::Config, "workers must be at least 1");
    return c;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

// Splits "<stem>.<rest>" at the first dot.
std::pair<std::string, std::string> split_name(const std::string& name) {
    const auto dot = name.find('.');
    if (dot == std::string::npos) return {name, ""};
    return {name.substr(0, dot), lower(name.substr(dot))};
}

std::int64_t timestamp_of(const std::string& id, const fs::path& file) {
    std::int64_t ts = 0;
    const auto [end, ec] = std::from_chars(id.data(), id.data() + id.size(), ts);
    if (ec != std::errc{} || end != id.data() + id.size())
        throw Error(ErrorKind::Validation, "frame name is not a unix timestamp: " + file.string());
    return ts;
}

bool is_frame_ext(const std::string& ext) { return ext == ".png" || ext == ".jpg" || ext == ".jpeg"; }

}  // namespace

FeedDir load_feed_dir(const fs::path& dir, const std::string& camera_id) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a feed directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    FeedDir out;
    out.feed.camera_id = camera_id;
    out.annotation.camera_id = camera_id;
    std::map<std::string, fs::path> masks, exclusions;
    for (const auto& file : files) {
        const auto [stem, ext] = split_name(file.filename().string());
        if (stem.empty()) continue;
        if (is_frame_ext(ext)) {
            out.feed.frames.push_back(load_frame(file, camera_id, stem, timestamp_of(stem, file)));
        } else if (ext == ".mask.png") {
            masks[stem] = file;
        } else if (ext == ".exclude.png") {
            exclusions[stem] = file;
        }
    }
    if (out.feed.frames.empty()) throw Error(ErrorKind::Validation, "no frames in " + dir.string());
    std::stable_sort(out.feed.frames.begin(), out.feed.frames.end(), [](const Frame& a, const Frame& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.frame_id < b.frame_id;
    });

    auto has_frame = [&](const std::string& id) {
        return std::any_of(out.feed.frames.begin(), out.feed.frames.end(),
                           [&](const Frame& f) { return f.frame_id == id; });
    };
    if (masks.size() > 1) throw Error(ErrorKind::Config, "more than one reference mask in " + dir.string());
    if (masks.size() == 1) {
        const auto& [id, path] = *masks.begin();
        if (!has_frame(id)) throw Error(ErrorKind::Validation, "reference mask without a frame: " + path.string());
        out.annotation.reference_frame_id = id;
        out.annotation.manual_mask = load_mask(path, Provenance::Manual, id);
    }
    for (const auto& [id, path] : exclusions) {
        if (!has_frame(id)) throw Error(ErrorKind::Validation, "exclusion mask without a frame: " + path.string());
        out.annotation.exclusion_masks.emplace(id, load_mask(path, Provenance::Manual, id));
    }
    return out;
}

std::vector<FeedDir> load_feeds(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error(ErrorKind::Io, "not a directory: " + root.string());
    std::vector<fs::path> subdirs;
    bool has_images = false;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) subdirs.push_back(entry.path());
        else if (entry.is_regular_file() && is_frame_ext(split_name(entry.path().filename().string()).second))
            has_images = true;
    }
    std::vector<FeedDir> feeds;
    if (has_images) {
        feeds.push_back(load_feed_dir(root, fs::absolute(root).lexically_normal().filename().string()));
        if (feeds.back().feed.camera_id.empty()) feeds.back().feed.camera_id = "camera";
        feeds.back().annotation.camera_id = feeds.back().feed.camera_id;
        return feeds;
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs) feeds.push_back(load_feed_dir(d, d.filename().string()));
    if (feeds.empty()) throw Error(ErrorKind::Validation, "no feeds under " + root.string());
    return feeds;
}

void write_feed_dir(const fs::path& dir, const SyntheticFeed& feed, std::size_t reference_index) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t k = 0; k < feed.frames.size(); ++k) {
        const Frame& f = feed.frames[k];
        save_frame_png(f, dir / (f.frame_id + ".png"));
        save_mask_png(feed.truth_masks[k], dir / (f.frame_id + ".truth.png"));
        if (k == reference_index) save_mask_png(feed.truth_masks[k], dir / (f.frame_id + ".mask.png"));
    }
}

OutputLock::OutputLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    path_ = dir / ".roadlabel.lock";
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
        if (fd >= 0) {
            const std::string pid = std::to_string(::getpid()) + "\n";
            [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        if (errno != EEXIST) break;
        long holder = 0;
        std::ifstream(path_) >> holder;
        const bool alive = holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM);
        if (alive) throw Error(ErrorKind::Io, "output directory is in use by process " + std::to_string(holder) + ": " + dir.string());
        fs::remove(path_, ec);
    }
    throw Error(ErrorKind::Io, "cannot lock output directory " + dir.string());
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

}  // namespace roadlabel::cli
