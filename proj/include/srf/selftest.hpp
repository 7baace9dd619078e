// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace srf {

// Fast built-in invariant suite for the CLI; prints one line per check and
// returns the number of failures.
int run_selftest();

}  // namespace srf
