#include "roadlabel/transfer.hpp"

#include "roadlabel/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace roadlabel {

std::string_view to_string(DatasetMode m) {
    switch (m) {
    case DatasetMode::Baseline: return "baseline";
    case DatasetMode::Reuse: return "reuse";
    case DatasetMode::Corrected: return "corrected";
    }
    return "unknown";
}

DatasetMode parse_dataset_mode(std::string_view s) {
    if (s == "baseline") return DatasetMode::Baseline;
    if (s == "reuse") return DatasetMode::Reuse;
    if (s == "corrected") return DatasetMode::Corrected;
    throw Error(ErrorKind::Config, "unknown dataset mode: " + std::string(s));
}

namespace {

const FeedAnnotation* find_annotation(std::span<const FeedAnnotation> annotations, const std::string& camera) {
    for (const auto& a : annotations)
        if (a.camera_id == camera) return &a;
    return nullptr;
}

bool same_shape(const Frame& f, const LabelMask& m) { return f.width == m.width && f.height == m.height; }

DatasetEntry make_entry(const Feed& feed, const Frame& frame, DatasetMode mode) {
    DatasetEntry e;
    e.camera_id = feed.camera_id;
    e.frame_id = frame.frame_id;
    e.timestamp = frame.timestamp;
    e.frame_path = feed.camera_id + "/" + frame.frame_id + ".png";
    e.mask_path = feed.camera_id + "/" + frame.frame_id + ".mask.png";
    e.mode = mode;
    return e;
}

// Shared per-feed preamble: annotation lookup and reference-frame checks.
// Returns nullptr (after reporting) when the feed cannot be used.
const FeedAnnotation* usable_annotation(const Feed& feed, std::span<const FeedAnnotation> annotations,
                                        Dataset& out) {
    const FeedAnnotation* ann = find_annotation(annotations, feed.camera_id);
    if (!ann || !ann->manual_mask) {
        out.report.push_back({feed.camera_id, "", "missing manual mask", std::nullopt});
        return nullptr;
    }
    bool has_reference = false;
    for (const Frame& f : feed.frames) {
        if (f.frame_id != ann->reference_frame_id) continue;
        has_reference = true;
        if (!same_shape(f, *ann->manual_mask)) {
            out.report.push_back({feed.camera_id, f.frame_id, "manual mask dimension mismatch", std::nullopt});
            return nullptr;
        }
    }
    if (!has_reference) {
        out.report.push_back({feed.camera_id, ann->reference_frame_id, "reference frame not in feed", std::nullopt});
        return nullptr;
    }
    return ann;
}

// Applies the frame's exclusion mask, if any. Returns false on a size mismatch.
bool apply_exclusion(const FeedAnnotation& ann, const std::string& frame_id, LabelMask& mask) {
    const auto it = ann.exclusion_masks.find(frame_id);
    if (it == ann.exclusion_masks.end()) return true;
    if (it->second.width != mask.width || it->second.height != mask.height) return false;
    const Provenance prov = mask.provenance;
    mask = subtract(mask, it->second);
    mask.provenance = prov;
    return true;
}

LabelMask reference_label(const FeedAnnotation& ann) {
    LabelMask m = *ann.manual_mask;
    m.provenance = Provenance::Manual;
    m.source_frame_id = ann.reference_frame_id;
    return m;
}

}  // namespace

Dataset emit_baseline(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations) {
    Dataset out;
    for (const Feed& feed : feeds) {
        const FeedAnnotation* ann = usable_annotation(feed, annotations, out);
        if (!ann) continue;
        for (const Frame& f : feed.frames) {
            if (f.frame_id != ann->reference_frame_id) continue;
            LabelMask mask = reference_label(*ann);
            if (!apply_exclusion(*ann, f.frame_id, mask)) {
                out.report.push_back({feed.camera_id, f.frame_id, "exclusion mask dimension mismatch", std::nullopt});
                break;
            }
            out.entries.push_back(make_entry(feed, f, DatasetMode::Baseline));
            out.masks.push_back(std::move(mask));
            break;
        }
    }
    return out;
}

Dataset emit_reuse(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations) {
    Dataset out;
    for (const Feed& feed : feeds) {
        const FeedAnnotation* ann = usable_annotation(feed, annotations, out);
        if (!ann) continue;
        for (const Frame& f : feed.frames) {
            if (!same_shape(f, *ann->manual_mask)) {
                out.report.push_back({feed.camera_id, f.frame_id, "frame dimension mismatch", std::nullopt});
                continue;
            }
            LabelMask mask = reference_label(*ann);
            if (f.frame_id != ann->reference_frame_id) mask.provenance = Provenance::Reuse;
            if (!apply_exclusion(*ann, f.frame_id, mask)) {
                out.report.push_back({feed.camera_id, f.frame_id, "exclusion mask dimension mismatch", std::nullopt});
                continue;
            }
            out.entries.push_back(make_entry(feed, f, DatasetMode::Reuse));
            out.masks.push_back(std::move(mask));
        }
    }
    return out;
}

Dataset emit_corrected(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations,
                       const ChainsByCamera& chains, double threshold) {
    Dataset out;
    for (const Feed& feed : feeds) {
        const FeedAnnotation* ann = usable_annotation(feed, annotations, out);
        if (!ann) continue;
        const auto feed_chains = chains.find(feed.camera_id);
        for (const Frame& f : feed.frames) {
            if (!same_shape(f, *ann->manual_mask)) {
                out.report.push_back({feed.camera_id, f.frame_id, "frame dimension mismatch", std::nullopt});
                continue;
            }
            DatasetEntry entry = make_entry(feed, f, DatasetMode::Corrected);
            LabelMask mask = reference_label(*ann);
            if (f.frame_id == ann->reference_frame_id) {
                entry.chain_length = 0;
                entry.response_product = 1.0;
            } else {
                const ChainResult* chain = nullptr;
                if (feed_chains != chains.end())
                    for (const auto& c : feed_chains->second)
                        if (c.target_frame_id == f.frame_id) chain = &c;
                if (!chain) {
                    out.report.push_back({feed.camera_id, f.frame_id, "missing chain result", std::nullopt});
                    continue;
                }
                if (chain->status == ChainStatus::Unreachable) {
                    out.report.push_back({feed.camera_id, f.frame_id, "unreachable", std::nullopt});
                    continue;
                }
                if (chain->status == ChainStatus::Filtered || chain->product < threshold) {
                    out.report.push_back({feed.camera_id, f.frame_id, "response product below threshold", chain->product});
                    continue;
                }
                if (chain->path.empty() || chain->path.front() != ann->reference_frame_id) {
                    out.report.push_back({feed.camera_id, f.frame_id, "chain does not start at the reference", std::nullopt});
                    continue;
                }
                mask = warp_mask(mask, chain->composed);
                entry.chain_length = chain->hops();
                entry.response_product = chain->product;
            }
            if (!apply_exclusion(*ann, f.frame_id, mask)) {
                out.report.push_back({feed.camera_id, f.frame_id, "exclusion mask dimension mismatch", std::nullopt});
                continue;
            }
            out.entries.push_back(std::move(entry));
            out.masks.push_back(std::move(mask));
        }
    }
    return out;
}

std::string manifest_line(const DatasetEntry& e) {
    nlohmann::json j = {{"frame_path", e.frame_path},
                        {"mask_path", e.mask_path},
                        {"camera_id", e.camera_id},
                        {"frame_id", e.frame_id},
                        {"timestamp", e.timestamp},
                        {"mode", to_string(e.mode)},
                        {"chain_length", e.chain_length ? nlohmann::json(*e.chain_length) : nlohmann::json()},
                        {"response_product", e.response_product ? nlohmann::json(*e.response_product) : nlohmann::json()},
                        {"filtered_reason", e.filtered_reason ? nlohmann::json(*e.filtered_reason) : nlohmann::json()}};
    return j.dump();
}

std::string report_line(const ReportLine& r) {
    std::ostringstream s;
    s << "camera=" << r.camera_id << " frame=" << (r.frame_id.empty() ? "-" : r.frame_id) << " reason=\""
      << r.reason << '"';
    if (r.response_product) s << " product=" << nlohmann::json(*r.response_product).dump();
    return s.str();
}

void write_dataset(const Dataset& dataset, std::span<const Feed> feeds, const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out.string() + ": " + ec.message());

    auto find_frame = [&](const DatasetEntry& e) -> const Frame* {
        for (const Feed& feed : feeds)
            if (feed.camera_id == e.camera_id)
                for (const Frame& f : feed.frames)
                    if (f.frame_id == e.frame_id) return &f;
        return nullptr;
    };

    std::ofstream manifest(out / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!manifest) throw Error(ErrorKind::Io, "cannot write manifest in " + out.string());
    for (std::size_t k = 0; k < dataset.entries.size(); ++k) {
        const DatasetEntry& e = dataset.entries[k];
        const Frame* frame = find_frame(e);
        if (!frame) throw Error(ErrorKind::Validation, "manifest entry refers to unknown frame " + e.frame_id);
        fs::create_directories(out / e.camera_id, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + (out / e.camera_id).string());
        save_frame_png(*frame, out / e.frame_path);
        save_mask_png(dataset.masks[k], out / e.mask_path);
        manifest << manifest_line(e) << '\n';
    }

    std::ofstream report(out / "report.txt", std::ios::binary | std::ios::trunc);
    if (!report) throw Error(ErrorKind::Io, "cannot write report in " + out.string());
    for (const auto& r : dataset.report) report << report_line(r) << '\n';
    if (!manifest || !report) throw Error(ErrorKind::Io, "failed writing dataset in " + out.string());
}

}  // namespace roadlabel
