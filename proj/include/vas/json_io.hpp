#pragma once

#include <nlohmann/json.hpp>

#include "vas/core.hpp"

namespace vas {

void to_json(nlohmann::json& j, const TemporalWindow& w);
void from_json(const nlohmann::json& j, TemporalWindow& w);

void to_json(nlohmann::json& j, const VideoRef& v);
void from_json(const nlohmann::json& j, VideoRef& v);

void to_json(nlohmann::json& j, const ClipRef& c);
void from_json(const nlohmann::json& j, ClipRef& c);

void to_json(nlohmann::json& j, const Caption& c);
void from_json(const nlohmann::json& j, Caption& c);

void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);

void to_json(nlohmann::json& j, const ScoredAnswer& a);
void from_json(const nlohmann::json& j, ScoredAnswer& a);

void to_json(nlohmann::json& j, const TraceEvent& e);
void from_json(const nlohmann::json& j, TraceEvent& e);

void to_json(nlohmann::json& j, const ExplorationTrace& t);
void from_json(const nlohmann::json& j, ExplorationTrace& t);

/// Full result including the trace.
void to_json(nlohmann::json& j, const VASResult& r);
void from_json(const nlohmann::json& j, VASResult& r);

/// Compact form printed by `vas ask`: answer, confidence, window,
/// terminated_by and the cost counters, without the event list.
nlohmann::json result_summary(const VASResult& r);

}  // namespace vas
