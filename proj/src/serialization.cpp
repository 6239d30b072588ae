#include "roadlabel/serialization.hpp"

#include "roadlabel/error.hpp"

namespace roadlabel {

void to_json(nlohmann::json& j, const SimilarityTransform& t) {
    j = {{"s", t.scale}, {"theta", t.rotation}, {"tx", t.tx}, {"ty", t.ty}};
}

void from_json(const nlohmann::json& j, SimilarityTransform& t) {
    t.scale = j.at("s").get<double>();
    t.rotation = j.at("theta").get<double>();
    t.tx = j.at("tx").get<double>();
    t.ty = j.at("ty").get<double>();
}

void to_json(nlohmann::json& j, const FMParams& p) {
    j = {{"highpass_enabled", p.highpass_enabled},
         {"logpolar_radial_bins", p.logpolar_radial_bins ? nlohmann::json(*p.logpolar_radial_bins) : nlohmann::json()},
         {"logpolar_angular_bins", p.logpolar_angular_bins ? nlohmann::json(*p.logpolar_angular_bins) : nlohmann::json()},
         {"window", "hanning"},
         {"subpixel_window", p.subpixel_window}};
}

void from_json(const nlohmann::json& j, FMParams& p) {
    if (j.contains("highpass_enabled")) p.highpass_enabled = j["highpass_enabled"].get<bool>();
    if (j.contains("logpolar_radial_bins") && !j["logpolar_radial_bins"].is_null())
        p.logpolar_radial_bins = j["logpolar_radial_bins"].get<int>();
    if (j.contains("logpolar_angular_bins") && !j["logpolar_angular_bins"].is_null())
        p.logpolar_angular_bins = j["logpolar_angular_bins"].get<int>();
    if (j.contains("window") && j["window"].get<std::string>() != "hanning")
        throw Error(ErrorKind::Config, "unsupported window: " + j["window"].get<std::string>());
    if (j.contains("subpixel_window")) p.subpixel_window = j["subpixel_window"].get<int>();
}

void to_json(nlohmann::json& j, const GraphParams& p) {
    j = {{"batch_size", p.batch_size},
         {"gamma", p.gamma},
         {"max_batch_distance", p.max_batch_distance},
         {"threshold", p.threshold}};
}

void from_json(const nlohmann::json& j, GraphParams& p) {
    if (j.contains("batch_size")) p.batch_size = j["batch_size"].get<int>();
    if (j.contains("gamma")) p.gamma = j["gamma"].get<double>();
    if (j.contains("max_batch_distance")) p.max_batch_distance = j["max_batch_distance"].get<int>();
    if (j.contains("threshold")) p.threshold = j["threshold"].get<double>();
}

void to_json(nlohmann::json& j, const ChainResult& c) {
    j = {{"target", c.target_frame_id},
         {"status", to_string(c.status)},
         {"path", c.path},
         {"hops", c.hops()},
         {"product", c.product},
         {"transform", c.composed}};
}

}  // namespace roadlabel
