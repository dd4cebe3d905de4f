// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Byte-level corruptions for loader robustness tests.

#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "dfc/io.hpp"

namespace dfc::testing {

using Bytes = std::vector<std::uint8_t>;

/// Applies one random corruption and names it. Never returns the input unchanged.
inline std::string corrupt(Bytes& b, std::mt19937_64& rng) {
  const Bytes before = b;
  auto pick = [&](std::size_t n) { return n == 0 ? std::size_t{0} : rng() % n; };
  std::string kind;
  switch (rng() % 7) {
    case 0: {
      const auto at = pick(b.size());
      b[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      kind = "bit flip at " + std::to_string(at);
      break;
    }
    case 1: {
      const auto at = pick(b.size());
      b[at] = static_cast<std::uint8_t>(rng());
      kind = "byte overwrite at " + std::to_string(at);
      break;
    }
    case 2: {
      const auto n = b.empty() ? 0 : 1 + pick(b.size() - 1);
      b.resize(b.size() - n);
      kind = "truncate by " + std::to_string(n);
      break;
    }
    case 3: {
      const auto n = 1 + rng() % 16;
      for (std::size_t i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(rng()));
      kind = "append " + std::to_string(n);
      break;
    }
    case 4: {
      const auto at = pick(b.size());
      const auto n = std::min<std::size_t>(b.size() - at, 1 + rng() % 32);
      for (std::size_t i = 0; i < n; ++i) b[at + i] = static_cast<std::uint8_t>(rng());
      kind = "random run at " + std::to_string(at);
      break;
    }
    case 5: {
      const auto at = pick(b.size());
      const auto n = std::min<std::size_t>(b.size() - at, 1 + rng() % 8);
      b.erase(b.begin() + static_cast<std::ptrdiff_t>(at),
              b.begin() + static_cast<std::ptrdiff_t>(at + n));
      kind = "delete " + std::to_string(n) + " at " + std::to_string(at);
      break;
    }
    default: {
      // Overwrite an aligned 8-byte field with an extreme integer.
      const auto at = pick(b.size() / 8) * 8;
      const std::int64_t extremes[] = {-1, 0, 1, 1LL << 40, INT64_MIN, INT64_MAX, 0x7fffffff};
      const auto v = extremes[rng() % 7];
      std::memcpy(b.data() + at, &v, std::min<std::size_t>(8, b.size() - at));
      kind = "extreme field at " + std::to_string(at);
      break;
    }
  }
  if (b == before) {
    b.push_back(0x5a);
    kind += " + append";
  }
  return kind;
}

/// Recomputes the trailing container checksum so corruptions reach the
/// structural checks behind it.
inline void reseal_model(Bytes& b) {
  if (b.size() < 8) return;
  const auto body = b.size() - 4;
  const auto c = io::crc32({b.data(), body});
  std::memcpy(b.data() + body, &c, 4);
}

/// Rewrites both checksums of a dataset meta/bin pair to match their content.
inline std::string reseal_meta(const std::string& meta, const Bytes& bin) {
  std::string body;
  std::size_t pos = 0;
  while (pos < meta.size()) {
    auto nl = meta.find('\n', pos);
    if (nl == std::string::npos) nl = meta.size();
    const auto line = meta.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.rfind("meta_crc32=", 0) == 0) continue;
    if (line.rfind("data_crc32=", 0) == 0) {
      body += "data_crc32=" + std::to_string(io::crc32(bin)) + "\n";
    } else {
      body += line + "\n";
    }
  }
  const auto tc = io::crc32({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
  return body + "meta_crc32=" + std::to_string(tc) + "\n";
}

}  // namespace dfc::testing
