#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpcr/config.hpp"
#include "dpcr/protocol.hpp"

namespace dpcr {

/// Wall-time fields live under this key; everything else in a result
/// document is a deterministic function of the config.
inline constexpr const char* kWallTimeKey = "wall_time_ms";

nlohmann::json result_to_json(const RunConfig& config, const std::string& source_description,
                              const ProtocolResult& result);

/// Long-form CSV: after_task,eval_task,accuracy,test_count.
void write_accuracy_csv(std::ostream& out, const ProtocolResult& result);

/// One row per grid cell with the cell's full configuration and metrics.
void write_grid_csv(std::ostream& out, const std::string& source_description,
                    const std::vector<GridRow>& rows);

/// Stable standard-output line: "A_f=<v> A_avg=<v>".
std::string summary_line(const Metrics& metrics);

}  // namespace dpcr
