#pragma once

// Command-line driver. Each run resolves a complete configuration document,
// executes one pipeline, and writes its outputs plus a `config.json` echo to
// <out>/<command>/<run-id>/, where run-id hashes the canonical configuration.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

namespace graphtv::cli {

using Json = nlohmann::json;

enum ExitCode : int { kSuccess = 0, kFailure = 1, kValidation = 2, kDivergence = 3 };

/// Defaults for `command` ("diffuse", "classify", "flow", "synth") and its
/// action ("simulate"/"fit" for flow, "sbm"/"transport" for synth, empty otherwise).
Json default_config(const std::string& command, const std::string& action);

/// Copies `overlay` into `base`. Throws InvalidArgument on keys absent from
/// `base` or on values whose JSON type differs from the default's.
void merge_config(Json& base, const Json& overlay);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

/// Canonical text of a configuration: sorted keys, two-space indent, trailing newline.
std::string canonical(const Json& config);

/// Runs the CLI; messages go to `err`, the output directory path to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace graphtv::cli
