#pragma once

#include "roadlabel/chaingraph.hpp"
#include "roadlabel/imgcore.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace roadlabel {

enum class DatasetMode { Baseline, Reuse, Corrected };

std::string_view to_string(DatasetMode m);
DatasetMode parse_dataset_mode(std::string_view s);

struct Feed {
    std::string camera_id;
    std::vector<Frame> frames;  // sorted by timestamp
};

struct FeedAnnotation {
    std::string camera_id;
    std::string reference_frame_id;
    std::optional<LabelMask> manual_mask;
    /// Per-frame pixels to remove from the transferred road label (e.g. vehicles).
    std::map<std::string, LabelMask> exclusion_masks;
};

struct DatasetEntry {
    std::string frame_path;  // relative to the dataset root
    std::string mask_path;
    std::string camera_id;
    std::string frame_id;
    std::int64_t timestamp = 0;
    DatasetMode mode = DatasetMode::Baseline;
    std::optional<std::size_t> chain_length;
    std::optional<double> response_product;
    std::optional<std::string> filtered_reason;
};

/// A frame that was not emitted, and why.
struct ReportLine {
    std::string camera_id;
    std::string frame_id;
    std::string reason;
    std::optional<double> response_product;
};

struct Dataset {
    std::vector<DatasetEntry> entries;
    std::vector<LabelMask> masks;  // parallel to entries
    std::vector<ReportLine> report;
};

using ChainsByCamera = std::map<std::string, std::vector<ChainResult>>;

Dataset emit_baseline(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations);
Dataset emit_reuse(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations);
Dataset emit_corrected(std::span<const Feed> feeds, std::span<const FeedAnnotation> annotations,
                       const ChainsByCamera& chains, double threshold = 0.45);

/// Writes `<out>/<camera_id>/<frame_id>.png`, `.mask.png`, `manifest.jsonl`
/// and `report.txt`. Frames are looked up in `feeds`.
void write_dataset(const Dataset& dataset, std::span<const Feed> feeds, const std::filesystem::path& out);

std::string manifest_line(const DatasetEntry& e);
std::string report_line(const ReportLine& r);

}  // namespace roadlabel
