#include "roadlabel/synthbench.hpp"

#include "roadlabel/error.hpp"
#include "roadlabel/rng.hpp"
#include "roadlabel/serialization.hpp"
#include "roadlabel/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace roadlabel {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double corner_dot(std::int64_t ix, std::int64_t iy, double dx, double dy, std::uint64_t seed) {
    static constexpr double g = 0.70710678118654752;
    static constexpr double dirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {g, g}, {-g, g}, {g, -g}, {-g, -g}};
    const std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull) ^
                                       (static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4Full));
    const auto& d = dirs[h & 7u];
    return d[0] * dx + d[1] * dy;
}

// Gradient noise, roughly in [-1, 1].
double gradient_noise(double x, double y, std::uint64_t seed) {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx0);
    const auto iy = static_cast<std::int64_t>(fy0);
    const double dx = x - fx0;
    const double dy = y - fy0;
    const double n00 = corner_dot(ix, iy, dx, dy, seed);
    const double n10 = corner_dot(ix + 1, iy, dx - 1, dy, seed);
    const double n01 = corner_dot(ix, iy + 1, dx, dy - 1, seed);
    const double n11 = corner_dot(ix + 1, iy + 1, dx - 1, dy - 1, seed);
    const double u = fade(dx);
    const double v = fade(dy);
    const double a = n00 + u * (n10 - n00);
    const double b = n01 + u * (n11 - n01);
    return 1.4 * (a + v * (b - a));
}

double texture(const SceneRecipe& s, double x, double y, std::uint64_t stream) {
    double sum = 0.0, norm = 0.0, amp = 1.0, period = s.texture_period;
    for (int o = 0; o < s.octaves; ++o) {
        sum += amp * gradient_noise(x / period, y / period, splitmix64(s.seed + stream * 131 + o));
        norm += amp;
        amp *= s.texture_persistence;
        period *= 0.5;
    }
    return norm > 0.0 ? sum / norm : 0.0;
}

bool inside_road(const SceneRecipe& s, double x, double y) {
    bool inside = false;
    const auto& poly = s.road;
    for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
        const double xa = poly[a].x * s.width, ya = poly[a].y * s.height;
        const double xb = poly[b].x * s.width, yb = poly[b].y * s.height;
        if ((ya > y) != (yb > y) && x < (xb - xa) * (y - ya) / (yb - ya) + xa) inside = !inside;
    }
    return inside;
}

// Calls fn(x, y, bx, by) with (bx, by) the base-scene pixel seen at frame pixel (x, y).
template <typename Fn>
void for_each_view_pixel(const SceneRecipe& s, const SimilarityTransform& view, Fn&& fn) {
    const SimilarityTransform inv = invert(view);
    const double cx = (s.width - 1) / 2.0;
    const double cy = (s.height - 1) / 2.0;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const Point2 p = inv.apply({x - cx, y - cy});
            fn(x, y, p.x + cx, p.y + cy);
        }
}

void check_scene(const SceneRecipe& s) {
    if (s.width < 16 || s.height < 16) throw Error(ErrorKind::Validation, "scene must be at least 16x16");
    if (!(s.texture_amplitude > 0.0) || s.octaves < 1 || !(s.texture_period > 0.0))
        throw Error(ErrorKind::DegenerateScene, "scene has no texture; registration needs texture");
}

SimilarityTransform step_transform(const DriftStep& mean, const DriftStep& stddev, Rng& rng) {
    return {std::exp(mean.log_scale + stddev.log_scale * rng.normal()),
            wrap_angle(mean.rotation + stddev.rotation * rng.normal()), mean.tx + stddev.tx * rng.normal(),
            mean.ty + stddev.ty * rng.normal()};
}

GrayImage perturb(const GrayImage& img, const Photometric& ph, Rng& rng) {
    const double contrast = rng.uniform(ph.contrast_min, ph.contrast_max);
    const double brightness = rng.uniform(ph.brightness_min, ph.brightness_max);
    GrayImage out = img;
    for (float& v : out.values()) {
        double x = contrast * v + brightness;
        if (ph.noise_std > 0.0) x += ph.noise_std * rng.normal();
        v = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
    if (ph.occlusion_fraction > 0.0) {
        const int w = out.width();
        const int h = out.height();
        std::vector<std::uint8_t> covered(static_cast<std::size_t>(w) * h, 0);
        std::size_t n_covered = 0;
        const auto target = static_cast<std::size_t>(ph.occlusion_fraction * w * h);
        while (n_covered < target) {
            const int rw = std::max(2, static_cast<int>(rng.uniform(0.05, 0.15) * w));
            const int rh = std::max(2, static_cast<int>(rng.uniform(0.03, 0.10) * h));
            const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, w - rw))));
            const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h - rh))));
            // Vehicle- or snow-like blob: a random flat shade with mild grain
            // and a few pixels of soft edge. Per-pixel uniform fill with hard
            // borders is spectrally white and swamps the phase-only
            // correlation far beyond what a real occluder does.
            const double shade = rng.uniform(0.1, 0.9);
            constexpr double feather = 3.0;
            for (int y = y0; y < std::min(h, y0 + rh); ++y)
                for (int x = x0; x < std::min(w, x0 + rw); ++x) {
                    const double edge = std::min({x - x0 + 0.5, x0 + rw - x - 0.5, y - y0 + 0.5, y0 + rh - y - 0.5});
                    const double a = std::min(1.0, edge / feather);
                    const double alpha = a * a * (3.0 - 2.0 * a);
                    const double fill = shade;
                    out.at(x, y) = static_cast<float>(std::clamp((1.0 - alpha) * out.at(x, y) + alpha * fill, 0.0, 1.0));
                    auto& c = covered[static_cast<std::size_t>(y) * w + x];
                    if (!c) {
                        c = 1;
                        ++n_covered;
                    }
                }
        }
    }
    return out;
}

double mask_iou(const LabelMask& a, const LabelMask& b) { return evaluate_masks(a, b).iou; }

}  // namespace

GrayImage render_scene(const SceneRecipe& s, const SimilarityTransform& view) {
    check_scene(s);
    const int ss = std::max(1, s.supersampling);
    const SimilarityTransform inv = invert(view);
    const double cx = (s.width - 1) / 2.0;
    const double cy = (s.height - 1) / 2.0;
    GrayImage out(s.width, s.height);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const double ox = (sx + 0.5) / ss - 0.5;
                    const double oy = (sy + 0.5) / ss - 0.5;
                    const Point2 p = inv.apply({x + ox - cx, y + oy - cy});
                    const double bx = p.x + cx;
                    const double by = p.y + cy;
                    double v;
                    if (inside_road(s, bx, by))
                        v = 0.30 + 0.8 * s.texture_amplitude * texture(s, bx, by, 1);
                    else
                        v = 0.55 + 1.6 * s.texture_amplitude * texture(s, bx, by, 0);
                    acc += std::clamp(v, 0.0, 1.0);
                }
            out.at(x, y) = static_cast<float>(acc / (ss * ss));
        }
    return out;
}

LabelMask render_road_mask(const SceneRecipe& s, const SimilarityTransform& view) {
    LabelMask mask(s.width, s.height, Provenance::Manual);
    for_each_view_pixel(s, view, [&](int x, int y, double bx, double by) {
        mask.at(x, y) = inside_road(s, bx, by) ? 1 : 0;
    });
    return mask;
}

bool within_recoverable_range(const SimilarityTransform& t, int width, int height) {
    return std::abs(t.rotation) <= 15.0 * kDeg + 1e-12 && t.scale >= 0.85 && t.scale <= 1.18 &&
           std::abs(t.tx) <= 0.25 * width && std::abs(t.ty) <= 0.25 * height;
}

void DriftScenario::validate() const {
    check_scene(scene);
    if (n_frames < 1) throw Error(ErrorKind::Validation, "scenario needs at least one frame");
    if (reference_index < 0 || reference_index >= n_frames)
        throw Error(ErrorKind::Validation, "reference_index outside the feed");
    if (photometric.contrast_min > photometric.contrast_max ||
        photometric.brightness_min > photometric.brightness_max || photometric.noise_std < 0.0 ||
        photometric.occlusion_fraction < 0.0 || photometric.occlusion_fraction >= 1.0)
        throw Error(ErrorKind::Validation, "invalid photometric ranges");
}

DriftScenario DriftScenario::preset(std::string_view name, std::uint64_t seed) {
    DriftScenario s;
    s.name = std::string(name);
    s.seed = seed;
    s.scene.seed = splitmix64(seed);
    if (name == "static") {
        s.n_frames = 12;
    } else if (name == "drift") {
        // ~16 px cumulative drift across the feed plus jitter and weather.
        s.n_frames = 24;
        s.walk_mean = {0.6, -0.35, 0.0, 0.0};
        s.walk_std = {0.3, 0.3, 0.05 * kDeg, 0.001};
        s.photometric = {-0.05, 0.05, 0.9, 1.1, 0.004, 0.01};
    } else if (name == "stress") {
        // Unrelated viewpoints: most frames are beyond the recoverable range.
        s.n_frames = 12;
        s.walk_std = {40.0, 40.0, 35.0 * kDeg, 0.2};
        s.photometric = {-0.1, 0.1, 0.8, 1.2, 0.02, 0.05};
        s.stress = true;
    } else {
        throw Error(ErrorKind::Config, "unknown scenario preset: " + std::string(name));
    }
    return s;
}

SyntheticFeed generate_feed(const DriftScenario& scenario, const std::string& camera_id) {
    scenario.validate();
    const auto& scene = scenario.scene;
    Rng walk_rng(splitmix64(scenario.seed ^ 0xD1B54A32D192ED03ull));
    Rng photo_rng(splitmix64(scenario.seed ^ 0x8CB92BA72F3D8DD7ull));

    SyntheticFeed feed;
    SimilarityTransform view = SimilarityTransform::identity();
    for (int k = 0; k < scenario.n_frames; ++k) {
        if (k > 0) view = compose(view, step_transform(scenario.walk_mean, scenario.walk_std, walk_rng));
        feed.truth.push_back(view);
    }

    if (!scenario.stress) {
        const SimilarityTransform to_ref = invert(feed.truth[scenario.reference_index]);
        for (const auto& t : feed.truth)
            if (!within_recoverable_range(compose(to_ref, t), scene.width, scene.height))
                throw Error(ErrorKind::Validation,
                            "scenario '" + scenario.name + "' leaves the recoverable range; mark it as stress");
    }

    for (int k = 0; k < scenario.n_frames; ++k) {
        const GrayImage clean = render_scene(scene, feed.truth[k]);
        // Annotators pick a clear frame to label, so the reference is never occluded.
        Photometric ph = scenario.photometric;
        if (k == scenario.reference_index) ph.occlusion_fraction = 0.0;
        const GrayImage noisy = perturb(clean, ph, photo_rng);
        const std::int64_t ts = scenario.start_timestamp + k * scenario.frame_interval;
        feed.frames.push_back(to_frame(noisy, camera_id, std::to_string(ts), ts));
        LabelMask truth = render_road_mask(scene, feed.truth[k]);
        truth.source_frame_id = feed.frames.back().frame_id;
        feed.truth_masks.push_back(std::move(truth));
    }
    return feed;
}

MetricsReport MetricsReport::from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    MetricsReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    const double dtp = static_cast<double>(tp);
    if (tp + fp + fn == 0) {
        r.iou = r.precision = r.recall = r.f1 = 1.0;
        return r;
    }
    r.iou = dtp / static_cast<double>(tp + fp + fn);
    r.precision = tp + fp > 0 ? dtp / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? dtp / static_cast<double>(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

MetricsReport evaluate_masks(const LabelMask& predicted, const LabelMask& truth) {
    if (predicted.width != truth.width || predicted.height != truth.height)
        throw Error(ErrorKind::DimensionMismatch, "masks differ in size");
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t k = 0; k < truth.bits.size(); ++k) {
        const bool p = predicted.bits[k] != 0;
        const bool t = truth.bits[k] != 0;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
        tn += !p && !t;
    }
    return MetricsReport::from_counts(tp, fp, fn, tn);
}

TransformError transform_error(const SimilarityTransform& estimate, const SimilarityTransform& truth) {
    return {std::hypot(estimate.tx - truth.tx, estimate.ty - truth.ty),
            std::abs(wrap_angle(estimate.rotation - truth.rotation)) / kDeg,
            std::abs(estimate.scale / truth.scale - 1.0)};
}

BenchmarkReport run_benchmark(const DriftScenario& scenario, const BenchmarkOptions& options,
                              const std::optional<std::filesystem::path>& overlay_dir) {
    const std::string camera = "synthetic";
    SyntheticFeed synth = generate_feed(scenario, camera);
    const std::size_t ref = static_cast<std::size_t>(scenario.reference_index);
    const std::string ref_id = synth.frames[ref].frame_id;

    BuildOptions build;
    build.workers = options.workers;
    const BuildResult built = build_graph(synth.frames, options.graph, options.fm, options.graph_seed, build);
    const auto chains = chain_all(built.graph, ref_id, options.graph.threshold);

    std::vector<Feed> feeds{{camera, synth.frames}};
    FeedAnnotation ann{camera, ref_id, synth.truth_masks[ref], {}};
    std::vector<FeedAnnotation> anns{ann};
    const Dataset reuse = emit_reuse(feeds, anns);
    const Dataset corrected = emit_corrected(feeds, anns, {{camera, chains}}, options.graph.threshold);

    BenchmarkReport report;
    report.scenario = scenario.name;
    const SimilarityTransform to_ref = invert(synth.truth[ref]);
    double sum_reuse_all = 0.0, sum_corr = 0.0, sum_reuse_paired = 0.0, sum_err = 0.0;
    std::size_t n_err = 0;

    for (std::size_t k = 0; k < synth.frames.size(); ++k) {
        if (k == ref) continue;
        const std::string& id = synth.frames[k].frame_id;
        FrameBenchmark fb;
        fb.frame_id = id;
        for (const auto& c : chains)
            if (c.target_frame_id == id) {
                fb.status = c.status;
                fb.hops = c.hops();
                fb.product = c.product;
                if (c.status != ChainStatus::Unreachable) {
                    fb.error = transform_error(c.composed, compose(to_ref, synth.truth[k]));
                    sum_err += fb.error->translation_px;
                    report.max_translation_error_px = std::max(report.max_translation_error_px, fb.error->translation_px);
                    ++n_err;
                }
            }
        for (std::size_t e = 0; e < reuse.entries.size(); ++e)
            if (reuse.entries[e].frame_id == id) fb.iou_reuse = mask_iou(reuse.masks[e], synth.truth_masks[k]);
        for (std::size_t e = 0; e < corrected.entries.size(); ++e)
            if (corrected.entries[e].frame_id == id) {
                fb.iou_corrected = mask_iou(corrected.masks[e], synth.truth_masks[k]);
                if (overlay_dir) {
                    std::filesystem::create_directories(*overlay_dir);
                    save_frame_png(overlay_mask(synth.frames[k], corrected.masks[e]),
                                   *overlay_dir / (id + ".overlay.png"));
                }
            }

        sum_reuse_all += fb.iou_reuse;
        if (fb.iou_corrected) {
            ++report.emitted;
            sum_corr += *fb.iou_corrected;
            sum_reuse_paired += fb.iou_reuse;
            report.min_iou_corrected = std::min(report.min_iou_corrected, *fb.iou_corrected);
        }
        report.filtered += fb.status == ChainStatus::Filtered;
        report.unreachable += fb.status == ChainStatus::Unreachable;
        report.frames.push_back(std::move(fb));
    }

    const double n = static_cast<double>(report.frames.size());
    if (n > 0) {
        report.mean_iou_reuse_all = sum_reuse_all / n;
        report.filter_rate = static_cast<double>(report.filtered + report.unreachable) / n;
    }
    if (report.emitted > 0) {
        report.mean_iou_corrected = sum_corr / static_cast<double>(report.emitted);
        report.mean_iou_reuse_paired = sum_reuse_paired / static_cast<double>(report.emitted);
    } else {
        report.min_iou_corrected = 0.0;
    }
    if (n_err > 0) report.mean_translation_error_px = sum_err / static_cast<double>(n_err);
    return report;
}

ChainErrorTrial measure_chain_error(const SceneRecipe& scene, std::size_t hops, std::uint64_t seed,
                                    const FMParams& fm) {
    Rng rng(splitmix64(seed ^ 0xA0761D6478BD642Full));
    std::vector<SimilarityTransform> views{SimilarityTransform::identity()};
    for (std::size_t k = 0; k < hops; ++k) {
        const SimilarityTransform step{std::exp(rng.uniform(-0.01, 0.01)), rng.uniform(-2.0, 2.0) * kDeg,
                                       rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)};
        views.push_back(compose(views.back(), step));
    }
    const Photometric ph{-0.03, 0.03, 0.95, 1.05, 0.01, 0.0};
    std::vector<PreparedImage> prepared;
    for (const auto& v : views) prepared.emplace_back(perturb(render_scene(scene, v), ph, rng), fm);

    ChainErrorTrial trial;
    trial.hops = hops;
    SimilarityTransform composed;
    for (std::size_t k = 1; k < views.size(); ++k) {
        const auto est = register_prepared(prepared[k - 1], prepared[k], fm).transform;
        const auto truth = compose(invert(views[k - 1]), views[k]);
        trial.edge_errors_px.push_back(transform_error(est, truth).translation_px);
        composed = compose(composed, est);
    }
    trial.composed_error_px = transform_error(composed, views.back()).translation_px;
    return trial;
}

void to_json(nlohmann::json& j, const DriftScenario& s) {
    auto step = [](const DriftStep& d) {
        return nlohmann::json{{"tx", d.tx}, {"ty", d.ty}, {"rotation_deg", d.rotation / kDeg}, {"log_scale", d.log_scale}};
    };
    nlohmann::json road = nlohmann::json::array();
    for (const auto& p : s.scene.road) road.push_back({p.x, p.y});
    j = {{"name", s.name},
         {"scene",
          {{"width", s.scene.width},
           {"height", s.scene.height},
           {"seed", s.scene.seed},
           {"texture_period", s.scene.texture_period},
           {"octaves", s.scene.octaves},
           {"texture_persistence", s.scene.texture_persistence},
           {"texture_amplitude", s.scene.texture_amplitude},
           {"supersampling", s.scene.supersampling},
           {"road", road}}},
         {"n_frames", s.n_frames},
         {"walk_mean", step(s.walk_mean)},
         {"walk_std", step(s.walk_std)},
         {"photometric",
          {{"brightness", {s.photometric.brightness_min, s.photometric.brightness_max}},
           {"contrast", {s.photometric.contrast_min, s.photometric.contrast_max}},
           {"noise_std", s.photometric.noise_std},
           {"occlusion_fraction", s.photometric.occlusion_fraction}}},
         {"seed", s.seed},
         {"stress", s.stress},
         {"reference_index", s.reference_index},
         {"start_timestamp", s.start_timestamp},
         {"frame_interval", s.frame_interval}};
}

void from_json(const nlohmann::json& j, DriftScenario& s) {
    if (j.contains("preset"))
        s = DriftScenario::preset(j["preset"].get<std::string>(), j.value("seed", std::uint64_t{1}));
    auto step = [](const nlohmann::json& d, DriftStep& out) {
        out.tx = d.value("tx", out.tx);
        out.ty = d.value("ty", out.ty);
        out.rotation = d.value("rotation_deg", out.rotation / kDeg) * kDeg;
        out.log_scale = d.value("log_scale", out.log_scale);
    };
    s.name = j.value("name", s.name);
    if (j.contains("scene")) {
        const auto& sc = j["scene"];
        s.scene.width = sc.value("width", s.scene.width);
        s.scene.height = sc.value("height", s.scene.height);
        s.scene.seed = sc.value("seed", s.scene.seed);
        s.scene.texture_period = sc.value("texture_period", s.scene.texture_period);
        s.scene.octaves = sc.value("octaves", s.scene.octaves);
        s.scene.texture_persistence = sc.value("texture_persistence", s.scene.texture_persistence);
        s.scene.texture_amplitude = sc.value("texture_amplitude", s.scene.texture_amplitude);
        s.scene.supersampling = sc.value("supersampling", s.scene.supersampling);
        if (sc.contains("road")) {
            const auto& road = sc["road"];
            if (!road.is_array() || road.size() != 4)
                throw Error(ErrorKind::Config, "scene.road must list four [x, y] corners");
            for (std::size_t k = 0; k < 4; ++k) s.scene.road[k] = {road[k].at(0).get<double>(), road[k].at(1).get<double>()};
        }
    }
    s.n_frames = j.value("n_frames", s.n_frames);
    if (j.contains("walk_mean")) step(j["walk_mean"], s.walk_mean);
    if (j.contains("walk_std")) step(j["walk_std"], s.walk_std);
    if (j.contains("photometric")) {
        const auto& p = j["photometric"];
        if (p.contains("brightness")) {
            s.photometric.brightness_min = p["brightness"].at(0).get<double>();
            s.photometric.brightness_max = p["brightness"].at(1).get<double>();
        }
        if (p.contains("contrast")) {
            s.photometric.contrast_min = p["contrast"].at(0).get<double>();
            s.photometric.contrast_max = p["contrast"].at(1).get<double>();
        }
        s.photometric.noise_std = p.value("noise_std", s.photometric.noise_std);
        s.photometric.occlusion_fraction = p.value("occlusion_fraction", s.photometric.occlusion_fraction);
    }
    s.seed = j.value("seed", s.seed);
    s.stress = j.value("stress", s.stress);
    s.reference_index = j.value("reference_index", s.reference_index);
    s.start_timestamp = j.value("start_timestamp", s.start_timestamp);
    s.frame_interval = j.value("frame_interval", s.frame_interval);
}

void to_json(nlohmann::json& j, const BenchmarkReport& r) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : r.frames) {
        nlohmann::json rec = {{"frame_id", f.frame_id},
                              {"status", to_string(f.status)},
                              {"hops", f.hops},
                              {"product", f.product},
                              {"iou_reuse", f.iou_reuse},
                              {"iou_corrected", f.iou_corrected ? nlohmann::json(*f.iou_corrected) : nlohmann::json()}};
        if (f.error)
            rec["error"] = {{"translation_px", f.error->translation_px},
                            {"rotation_deg", f.error->rotation_deg},
                            {"scale_rel", f.error->scale_rel}};
        frames.push_back(std::move(rec));
    }
    j = {{"scenario", r.scenario},
         {"emitted", r.emitted},
         {"filtered", r.filtered},
         {"unreachable", r.unreachable},
         {"filter_rate", r.filter_rate},
         {"mean_iou_reuse_all", r.mean_iou_reuse_all},
         {"mean_iou_reuse_paired", r.mean_iou_reuse_paired},
         {"mean_iou_corrected", r.mean_iou_corrected},
         {"min_iou_corrected", r.min_iou_corrected},
         {"mean_translation_error_px", r.mean_translation_error_px},
         {"max_translation_error_px", r.max_translation_error_px},
         {"frames", frames}};
}

}  // namespace roadlabel
