// SPDX-License-Identifier: Apache-2.0
// nlohmann::json bindings for the value types. Kept out of the other public
// headers so only translation units that serialize pay for json.hpp.
#pragma once

#include <json.hpp>

#include "lrpolicy/schedule.hpp"

namespace lrpolicy {

struct TrialRecord;
struct Metrics;

nlohmann::json policy_to_json(const Policy &policy);
/// Throws ParseError with a field path on any schema violation.
Policy policy_from_json(const nlohmann::json &doc);

/// `stable` drops wall-clock fields so identical runs serialize identically.
nlohmann::json record_to_json(const TrialRecord &record, bool stable = false);
TrialRecord record_from_json(const nlohmann::json &doc);

} // namespace lrpolicy
