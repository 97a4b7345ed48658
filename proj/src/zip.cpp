// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/zip.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

#include "ladd/binio.hpp"
#include "ladd/errors.hpp"

namespace ladd {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDeflate = 8;
constexpr std::uint16_t kVersion = 20;
// 1980-01-01 00:00 in DOS format
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t u32_checked(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(std::string("zip: ") + what + " exceeds 4 GiB (ZIP64 unsupported)");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string deflate_raw(std::string_view data, int level) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw FormatError("deflate: init failed");
  }
  std::string out(deflateBound(&zs, data.size()), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw FormatError("deflate: stream did not finish");
  out.resize(produced);
  return out;
}

std::string inflate_raw(std::string_view data, std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw FormatError("inflate: init failed");
  std::string out(expected_size, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected_size) {
    throw IntegrityError("inflate: payload does not decompress to " +
                         std::to_string(expected_size) + " bytes");
  }
  return out;
}

std::string zip_encode(const std::vector<ZipEntry>& entries, int level) {
  using binio::put;
  std::string out, central;
  for (const auto& e : entries) {
    const std::string packed = deflate_raw(e.data, level);
    const std::uint32_t crc = crc_of(e.data);
    const std::uint32_t offset = u32_checked(out.size(), "archive");
    const auto name_len = static_cast<std::uint16_t>(e.name.size());

    put(out, kLocalSig);
    put(out, kVersion);
    put(out, std::uint16_t{0});
    put(out, kDeflate);
    put(out, kDosTime);
    put(out, kDosDate);
    put(out, crc);
    put(out, u32_checked(packed.size(), "entry"));
    put(out, u32_checked(e.data.size(), "entry"));
    put(out, name_len);
    put(out, std::uint16_t{0});
    out += e.name;
    out += packed;

    put(central, kCentralSig);
    put(central, kVersion);
    put(central, kVersion);
    put(central, std::uint16_t{0});
    put(central, kDeflate);
    put(central, kDosTime);
    put(central, kDosDate);
    put(central, crc);
    put(central, static_cast<std::uint32_t>(packed.size()));
    put(central, static_cast<std::uint32_t>(e.data.size()));
    put(central, name_len);
    put(central, std::uint16_t{0});  // extra
    put(central, std::uint16_t{0});  // comment
    put(central, std::uint16_t{0});  // disk
    put(central, std::uint16_t{0});  // internal attrs
    put(central, std::uint32_t{0});  // external attrs
    put(central, offset);
    central += e.name;
  }
  const std::uint32_t cd_offset = u32_checked(out.size(), "archive");
  out += central;
  put(out, kEndSig);
  put(out, std::uint16_t{0});
  put(out, std::uint16_t{0});
  put(out, static_cast<std::uint16_t>(entries.size()));
  put(out, static_cast<std::uint16_t>(entries.size()));
  put(out, static_cast<std::uint32_t>(central.size()));
  put(out, cd_offset);
  put(out, std::uint16_t{0});
  return out;
}

std::vector<ZipEntry> zip_decode(std::string_view bytes) {
  if (bytes.size() < 22) throw FormatError("zip: file too short for an end record");
  std::size_t eocd = std::string_view::npos;
  for (std::size_t p = bytes.size() - 22 + 1; p-- > 0;) {
    binio::Reader r(bytes.substr(p, 4), "zip");
    if (r.get<std::uint32_t>() == kEndSig) {
      eocd = p;
      break;
    }
    if (bytes.size() - p > 22 + 65535) break;
  }
  if (eocd == std::string_view::npos) throw FormatError("zip: end-of-central-directory not found");

  binio::Reader end(bytes.substr(eocd), "zip end record");
  end.get<std::uint32_t>();
  end.get<std::uint16_t>();
  end.get<std::uint16_t>();
  end.get<std::uint16_t>();
  const auto count = end.get<std::uint16_t>();
  const auto cd_size = end.get<std::uint32_t>();
  const auto cd_offset = end.get<std::uint32_t>();
  if (std::size_t{cd_offset} + cd_size > eocd) throw FormatError("zip: central directory out of bounds");

  binio::Reader cd(bytes.substr(cd_offset, cd_size), "zip central directory");
  std::vector<ZipEntry> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (cd.get<std::uint32_t>() != kCentralSig) {
      throw FormatError("zip: bad central header signature at entry " + std::to_string(i));
    }
    cd.get<std::uint16_t>();
    cd.get<std::uint16_t>();
    const auto flags = cd.get<std::uint16_t>();
    const auto method = cd.get<std::uint16_t>();
    cd.get<std::uint16_t>();
    cd.get<std::uint16_t>();
    const auto crc = cd.get<std::uint32_t>();
    const auto csize = cd.get<std::uint32_t>();
    const auto usize = cd.get<std::uint32_t>();
    const auto name_len = cd.get<std::uint16_t>();
    const auto extra_len = cd.get<std::uint16_t>();
    const auto comment_len = cd.get<std::uint16_t>();
    cd.get<std::uint16_t>();
    cd.get<std::uint16_t>();
    cd.get<std::uint32_t>();
    const auto local_offset = cd.get<std::uint32_t>();
    ZipEntry e;
    e.name = cd.get_string(name_len);
    cd.get_string(extra_len);
    cd.get_string(comment_len);
    if (flags & 1) throw FormatError("zip: encrypted entry '" + e.name + "'");

    if (local_offset >= bytes.size()) throw FormatError("zip: local header out of bounds for '" + e.name + "'");
    binio::Reader lh(bytes.substr(local_offset), "zip local header '" + e.name + "'");
    if (lh.get<std::uint32_t>() != kLocalSig) {
      throw FormatError("zip: bad local header signature for '" + e.name + "'");
    }
    for (int k = 0; k < 11; ++k) lh.get<std::uint16_t>();
    const auto lname = lh.get<std::uint16_t>();
    const auto lextra = lh.get<std::uint16_t>();
    lh.get_string(lname);
    lh.get_string(lextra);
    const std::string packed = lh.get_string(csize);
    if (method == kDeflate) {
      e.data = inflate_raw(packed, usize);
    } else if (method == 0) {
      e.data = packed;
    } else {
      throw FormatError("zip: unsupported compression method " + std::to_string(method));
    }
    if (e.data.size() != usize || crc_of(e.data) != crc) {
      throw IntegrityError("zip: CRC mismatch in '" + e.name + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ladd
