#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "rowfollow/simulation.hpp"

namespace rowfollow {

/// Writes via a temporary file plus rename so a crash never leaves a
/// partial output behind.
void writeTextFileAtomic(const std::string& path, const std::string& content);

/// Per-tick trajectory log, header:
/// t,x,y,phi,true_dL,true_dR,true_phi,est_dL,est_dR,est_phi,omega_mpc,omega_cmd,rho1,intervention
std::string recordCsv(const TrialRecord& record);
void writeRecordCsv(const std::string& path, const TrialRecord& record);

/// Parses a record CSV back into tick rows (summary fields left empty).
TrialRecord readRecordCsv(const std::string& path);

nlohmann::json summaryJson(const TrialRecord& record);
void writeSummaryJson(const std::string& path, const TrialRecord& record);

/// Standalone SVG of the field (centerline, row boundaries), the robot path
/// and intervention markers. Deterministic for a given record.
std::string trajectorySvg(const FieldModel& field, const TrialRecord& record);
void writeTrajectorySvg(const std::string& path, const FieldModel& field,
                        const TrialRecord& record);

}  // namespace rowfollow
