#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "json.hpp"

#include "coach/sim/study.hpp"

namespace coach::sim {

nlohmann::json to_json(const CalibrationStats& c);
nlohmann::json to_json(const StudyReport& r);
nlohmann::json to_json(const ReplicationSummary& s);

/// One row per arm, coachee and session.
std::string study_csv(const StudyReport& r);
/// One row per arm and session.
std::string session_csv(const StudyReport& r);

/// Line chart of pooled mean reward per session, one line per arm, with
/// +-1 std error bars.
std::string reward_svg(const StudyReport& r);

/// Session means averaged over replications. Each SessionStat's std is the
/// spread of replication means and `turns` the replication count, so plotted
/// error bars are the standard error across replications.
StudyReport aggregate(const ReplicationSummary& s);
/// study_csv rows of every replication, with a leading replication column.
std::string replication_csv(const ReplicationSummary& s);

/// Groups logged sessions into a report: mode "adaptive" fills the adaptive
/// arm, every other mode the generic one.
StudyReport report_from_logs(std::span<const dialogue::SessionLog> logs);

/// study.json, coachee_sessions.csv, sessions.csv, reward.svg under `dir`.
void write_study_report(const std::filesystem::path& dir, const StudyReport& r);

}  // namespace coach::sim
