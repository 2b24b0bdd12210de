#pragma once

// nlohmann::json conversions for the configuration-bearing types.

#include <json.hpp>

#include "tunenet/datasets.hpp"
#include "tunenet/nn.hpp"
#include "tunenet/sim.hpp"
#include "tunenet/types.hpp"

namespace tunenet {
void to_json(nlohmann::json& j, const Interval& v);
void from_json(const nlohmann::json& j, Interval& v);
}  // namespace tunenet

namespace tunenet::sim {
void to_json(nlohmann::json& j, const TrajectorySpec& v);
void from_json(const nlohmann::json& j, TrajectorySpec& v);
}  // namespace tunenet::sim

namespace tunenet::nn {
void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);
}  // namespace tunenet::nn

namespace tunenet::data {
void to_json(nlohmann::json& j, const DatasetSpec& v);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, DatasetSpec& v);
}  // namespace tunenet::data
