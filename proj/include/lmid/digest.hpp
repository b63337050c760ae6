// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lmid {

// FNV-1a 64-bit. Stable across runs; used for config digests and
// reproducibility checks, not for security.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Digest of a file's raw bytes; throws on unreadable path.
std::uint64_t digest_file(const std::string& path);

}  // namespace lmid
