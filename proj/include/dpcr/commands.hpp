#pragma once

// Subcommand implementations behind the `dpcr` binary. Each throws a
// dpcr::Error on failure; the binary turns that into a nonzero exit.

#include <filesystem>
#include <memory>
#include <ostream>
#include <vector>

#include "dpcr/config.hpp"
#include "dpcr/protocol.hpp"

namespace dpcr {

std::unique_ptr<EmbeddingSource> make_source(const SourceConfig& source);

/// Writes the full dump stream plus manifest.json; returns the dump paths.
std::vector<std::filesystem::path> cmd_generate(const RunConfig& config, std::ostream& out);

/// Writes results.json / accuracy.csv / state.dpck per output.formats and
/// prints the summary line.
ProtocolResult cmd_run(const RunConfig& config, std::ostream& out);

/// Writes grid.csv; returns the rows.
std::vector<GridRow> cmd_ablate(const RunConfig& config, std::ostream& out);

void cmd_inspect(const std::filesystem::path& path, std::ostream& out);

}  // namespace dpcr
