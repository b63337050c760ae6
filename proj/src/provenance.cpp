// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/provenance.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace lmid {

void write_provenance(const std::string& dir, const std::string& command,
                      const std::string& config_digest, const std::string& config_text,
                      std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["command"] = command;
    j["config_digest"] = config_digest;
    j["config"] = nlohmann::json::parse(config_text);
    j["seed"] = seed;
    j["version"] = kVersion;
    std::ofstream out(std::filesystem::path(dir) / "run.json");
    if (!out) throw std::runtime_error("cannot write provenance under " + dir);
    out << j.dump(2) << "\n";
}

}  // namespace lmid
