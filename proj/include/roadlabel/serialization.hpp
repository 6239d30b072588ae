#pragma once

#include "roadlabel/chaingraph.hpp"
#include "roadlabel/imgcore.hpp"
#include "roadlabel/registration.hpp"

#include <nlohmann/json.hpp>

namespace roadlabel {

void to_json(nlohmann::json& j, const SimilarityTransform& t);
void from_json(const nlohmann::json& j, SimilarityTransform& t);

void to_json(nlohmann::json& j, const FMParams& p);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, FMParams& p);

void to_json(nlohmann::json& j, const GraphParams& p);
void from_json(const nlohmann::json& j, GraphParams& p);

void to_json(nlohmann::json& j, const ChainResult& c);

}  // namespace roadlabel
