// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal ZIP container (DEFLATE entries, no ZIP64, fixed timestamps) and raw
// DEFLATE helpers. Output is byte-deterministic for identical inputs.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ladd {

struct ZipEntry {
  std::string name;
  std::string data;
};

std::string deflate_raw(std::string_view data, int level = 6);
std::string inflate_raw(std::string_view data, std::size_t expected_size);

std::string zip_encode(const std::vector<ZipEntry>& entries, int level = 6);
/// Throws FormatError on malformed containers and IntegrityError on CRC
/// or size mismatches.
std::vector<ZipEntry> zip_decode(std::string_view bytes);

}  // namespace ladd
