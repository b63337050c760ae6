// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace lmid {

// Subcommand dispatcher for the landmarkid tool. Exit status 0 on success,
// 2 on configuration/usage errors (with the offending field named), 1 on
// runtime failures.
int dispatch(int argc, const char* const* argv);

}  // namespace lmid
