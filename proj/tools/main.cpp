// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/cli.hpp"

int main(int argc, char** argv) { return lmid::dispatch(argc, argv); }
