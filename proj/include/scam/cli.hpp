#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scam {

/// Subcommands: train, reconstruct, pose-transfer, subject-transfer, evaluate,
/// synth-data, visualize-attention. Returns 0 on success, otherwise the exit
/// code of the failure category after printing one
/// "error: <category>: <message>" line to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace scam
