// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace ladd {

/// Keeps large tensor buffers on the heap between steps instead of returning
/// them to the OS. Safe to call more than once; a no-op off glibc.
void tune_allocator();

}  // namespace ladd
