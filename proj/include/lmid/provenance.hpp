// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace lmid {

inline constexpr const char* kVersion = "0.1.0";

// Writes <dir>/run.json with everything needed to re-run the command:
// subcommand, config digest, full config text, and seed.
void write_provenance(const std::string& dir, const std::string& command,
                      const std::string& config_digest, const std::string& config_text,
                      std::uint64_t seed);

}  // namespace lmid
