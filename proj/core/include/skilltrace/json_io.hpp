#pragma once

#include <string>

#include "skilltrace/allocation.hpp"
#include "skilltrace/bkt.hpp"
#include "skilltrace/flywheel.hpp"
#include "skilltrace/metrics.hpp"

namespace skilltrace {

// Stable, key-ordered JSON; round-trips through the matching from_* parser.
// Parsers throw Error{Validation} on malformed documents or out-of-domain
// values and reject unknown keys.

std::string params_to_json(const SkillParams& params);
SkillParams params_from_json(const std::string& text);

std::string metric_report_to_json(const MetricReport& report);

std::string problem_to_json(const AllocationProblem& problem);
AllocationProblem problem_from_json(const std::string& text);

std::string plan_to_json(const AllocationPlan& plan);

std::string flywheel_state_to_json(const FlywheelState& state);
FlywheelState flywheel_state_from_json(const std::string& text);

}  // namespace skilltrace
