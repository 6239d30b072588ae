#pragma once

#include "roadlabel/chaingraph.hpp"
#include "roadlabel/imgcore.hpp"
#include "roadlabel/registration.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace roadlabel {

/// Procedural base scene: a trapezoidal road over band-limited gradient
/// noise. The scene is defined on the whole plane, so any view of it can be
/// rendered without border fill.
struct SceneRecipe {
    int width = 256;
    int height = 256;
    std::uint64_t seed = 1;
    double texture_period = 24.0;  // pixels, coarsest octave
    int octaves = 5;
    double texture_persistence = 0.95;  // amplitude ratio between octaves
    double texture_amplitude = 0.3;
    int supersampling = 2;  // per axis
    /// Road corners in normalized [0,1] image coordinates.
    std::array<Point2, 4> road = {{{0.46, 0.38}, {0.56, 0.38}, {0.84, 0.90}, {0.18, 0.90}}};
};

/// Renders the view seen after the camera moved by `view` (base -> frame).
GrayImage render_scene(const SceneRecipe& scene, const SimilarityTransform& view);
LabelMask render_road_mask(const SceneRecipe& scene, const SimilarityTransform& view);

struct DriftStep {
    double tx = 0.0;        // pixels
    double ty = 0.0;        // pixels
    double rotation = 0.0;  // radians
    double log_scale = 0.0;
};

struct Photometric {
    double brightness_min = 0.0, brightness_max = 0.0;
    double contrast_min = 1.0, contrast_max = 1.0;
    double noise_std = 0.0;
    double occlusion_fraction = 0.0;
};

struct DriftScenario {
    std::string name = "custom";
    SceneRecipe scene;
    int n_frames = 24;
    DriftStep walk_mean;  // deterministic per-frame trend
    DriftStep walk_std;   // random-walk increments
    Photometric photometric;
    std::uint64_t seed = 1;
    /// Stress scenarios may leave the recoverable range.
    bool stress = false;
    int reference_index = 0;
    std::int64_t start_timestamp = 1700000000;
    std::int64_t frame_interval = 1200;

    void validate() const;

    static DriftScenario preset(std::string_view name, std::uint64_t seed = 1);
};

void to_json(nlohmann::json& j, const DriftScenario& s);
void from_json(const nlohmann::json& j, DriftScenario& s);

/// Documented recoverable range of the registration: |theta| <= 15 deg,
/// scale in [0.85, 1.18], |t| <= 25% of the image size on each axis.
bool within_recoverable_range(const SimilarityTransform& t, int width, int height);

struct SyntheticFeed {
    std::vector<Frame> frames;
    std::vector<SimilarityTransform> truth;  // base scene -> frame k
    std::vector<LabelMask> truth_masks;
};

/// Throws DegenerateScene for flat texture and Validation when a non-stress
/// scenario drifts outside the recoverable range.
SyntheticFeed generate_feed(const DriftScenario& scenario, const std::string& camera_id = "synthetic");

struct MetricsReport {
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    static MetricsReport from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);
};

MetricsReport evaluate_masks(const LabelMask& predicted, const LabelMask& truth);

/// Translation error is measured at the image center.
struct TransformError {
    double translation_px = 0.0;
    double rotation_deg = 0.0;
    double scale_rel = 0.0;
};

TransformError transform_error(const SimilarityTransform& estimate, const SimilarityTransform& truth);

struct FrameBenchmark {
    std::string frame_id;
    ChainStatus status = ChainStatus::Unreachable;
    std::size_t hops = 0;
    double product = 0.0;
    std::optional<TransformError> error;
    double iou_reuse = 0.0;
    std::optional<double> iou_corrected;  // unset when the frame was not emitted
};

struct BenchmarkOptions {
    GraphParams graph;
    FMParams fm;
    std::uint64_t graph_seed = 7;
    unsigned workers = 1;
};

struct BenchmarkReport {
    std::string scenario;
    std::vector<FrameBenchmark> frames;  // non-reference frames only
    std::size_t emitted = 0;
    std::size_t filtered = 0;
    std::size_t unreachable = 0;
    double filter_rate = 0.0;
    double mean_iou_reuse_all = 0.0;
    /// Means over the frames the corrected set emitted.
    double mean_iou_corrected = 0.0;
    double mean_iou_reuse_paired = 0.0;
    double min_iou_corrected = 1.0;
    double mean_translation_error_px = 0.0;
    double max_translation_error_px = 0.0;
};

void to_json(nlohmann::json& j, const BenchmarkReport& r);

/// build_graph -> chain_all -> emit_corrected / emit_reuse on a synthetic
/// feed, scored against its ground truth. Optionally writes overlay PNGs.
BenchmarkReport run_benchmark(const DriftScenario& scenario, const BenchmarkOptions& options = {},
                              const std::optional<std::filesystem::path>& overlay_dir = std::nullopt);

struct ChainErrorTrial {
    std::vector<double> edge_errors_px;
    double composed_error_px = 0.0;
    std::size_t hops = 0;
};

/// Renders hops+1 views linked by small random steps, registers consecutive
/// views, composes the hops and measures translation errors.
ChainErrorTrial measure_chain_error(const SceneRecipe& scene, std::size_t hops, std::uint64_t seed,
                                    const FMParams& fm = {});

}  // namespace roadlabel
