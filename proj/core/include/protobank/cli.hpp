#pragma once

#include <string>
#include <vector>

namespace protobank::cli {

// Runs one subcommand (gen-data, train, metrics, distrib, audit, simulate,
// export-tsne-csv, check-grad). Returns 0 on success, 1 on validation or
// usage failure, 2 on I/O failure. Never throws.
int dispatch(int argc, const char* const* argv);

// Same, argv[0] implied; convenient for in-process tests.
int dispatch(const std::vector<std::string>& args);

}  // namespace protobank::cli
