#pragma once

// JSON encodings shared by the store, the server and the CLI.

#include "json.hpp"

#include "coach/dialogue/session.hpp"
#include "coach/policy/policy.hpp"
#include "coach/rupture/model.hpp"

namespace coach {

class StoreError : public Error {
 public:
  using Error::Error;
};

void to_json(nlohmann::json& j, const StateVector& s);
void from_json(const nlohmann::json& j, StateVector& s);
void to_json(nlohmann::json& j, const DurationStats& d);
void from_json(const nlohmann::json& j, DurationStats& d);
void to_json(nlohmann::json& j, const StateNormalizer& n);
void from_json(const nlohmann::json& j, StateNormalizer& n);
void to_json(nlohmann::json& j, const RewardConfig& r);
void from_json(const nlohmann::json& j, RewardConfig& r);
void to_json(nlohmann::json& j, const RewardComponents& r);
void from_json(const nlohmann::json& j, RewardComponents& r);
void to_json(nlohmann::json& j, const BaselineValence& b);
void from_json(const nlohmann::json& j, BaselineValence& b);
void to_json(nlohmann::json& j, const TurnObservation& o);
void from_json(const nlohmann::json& j, TurnObservation& o);
void to_json(nlohmann::json& j, const Transition& t);
void from_json(const nlohmann::json& j, Transition& t);

namespace nn {
void to_json(nlohmann::json& j, const LayerSpec& l);
void from_json(const nlohmann::json& j, LayerSpec& l);
void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);
}  // namespace nn

namespace policy {
void to_json(nlohmann::json& j, const TrainingMetadata& m);
void from_json(const nlohmann::json& j, TrainingMetadata& m);
}  // namespace policy

namespace rupture {
void to_json(nlohmann::json& j, const NormStats& n);
void from_json(const nlohmann::json& j, NormStats& n);
}  // namespace rupture

namespace dialogue {
void to_json(nlohmann::json& j, const TranscriptEntry& e);
void from_json(const nlohmann::json& j, TranscriptEntry& e);
void to_json(nlohmann::json& j, const ModerationRecord& m);
void from_json(const nlohmann::json& j, ModerationRecord& m);
void to_json(nlohmann::json& j, const TurnRecord& t);
void from_json(const nlohmann::json& j, TurnRecord& t);
void to_json(nlohmann::json& j, const SessionConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, SessionConfig& c);
}  // namespace dialogue

}  // namespace coach
