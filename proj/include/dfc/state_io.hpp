// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// JSON form of a selection state, written by compress and read by realize.

#pragma once

#include <string>

#include "dfc/compressor.hpp"

namespace dfc::io {

std::string serialize_state(const compress::SelectionState& s);
/// Throws FormatError on malformed or inconsistent input.
compress::SelectionState parse_state(const std::string& text);

void save_state(const compress::SelectionState& s, const std::string& path);
compress::SelectionState load_state(const std::string& path);

}  // namespace dfc::io
