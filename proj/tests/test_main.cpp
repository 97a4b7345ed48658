// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "ladd/runtime.hpp"

int main(int argc, char** argv) {
  ladd::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
