#pragma once

#include <string>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/expansion.hpp"

namespace x3df {

// ---- ArchSpec document ----------------------------------------------------
// UTF-8 "key value" lines in a fixed order; floats carry 17 significant
// digits so that save -> load -> save is byte identical.

std::string spec_to_text(const ArchSpec& spec);
ArchSpec spec_from_text(const std::string& text);
void save_spec(const ArchSpec& spec, const std::string& path);
ArchSpec load_spec(const std::string& path);

// ---- Trajectory CSV ---------------------------------------------------------
// One row per chosen step (candidate=0) followed by one row per unchosen
// candidate (candidate=1); step 0 is the start point. A leading # comment
// carries the settings and criterion id.

std::string trajectory_to_csv(const Trajectory& trajectory);
Trajectory trajectory_from_csv(const std::string& text);
void save_trajectory(const Trajectory& trajectory, const std::string& path);
Trajectory load_trajectory(const std::string& path);

// ---- Complexity report ------------------------------------------------------

std::string report_to_csv(const ComplexityReport& rep);
std::string report_to_text(const ComplexityReport& rep);
std::string render_report_table(const ComplexityReport& rep);

// ---- Trade-off curve --------------------------------------------------------
// (flops, score) per chosen step plus candidate points, knobs preserved.

std::string curve_csv(const Trajectory& trajectory);

// ---- Shape trace ------------------------------------------------------------
// Debug dump: one row per layer, analytical or engine-recorded alike.

std::string shape_trace_to_csv(const ShapeTrace& trace);

// Shared file helpers.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace x3df
