// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/state_io.hpp"

#include <cmath>
#include <json.hpp>

#include "dfc/io.hpp"

namespace dfc::io {

using nlohmann::json;

std::string serialize_state(const compress::SelectionState& s) {
  json j;
  j["format"] = "dfc-state-1";
  j["scheme"] = linalg::to_string(s.scheme);
  j["iteration"] = s.iteration;
  j["mu"] = s.mu;
  json units = json::array();
  for (std::size_t u = 0; u < s.gammas.size(); ++u) {
    json e;
    e["mask"] = std::vector<float>(s.masks[u].data().begin(), s.masks[u].data().end());
    e["gamma"] = s.gammas[u];
    e["tau"] = s.tau[u];
    e["original_spectrum"] = s.original_spectra[u];
    e["spectrum"] = s.spectra[u];
    units.push_back(std::move(e));
  }
  j["units"] = std::move(units);
  return j.dump(1) + "\n";
}

namespace {

double finite(const json& v, const char* what) {
  if (!v.is_number()) throw FormatError(std::string("state: ") + what + " is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw FormatError(std::string("state: ") + what + " is not finite");
  return d;
}

std::vector<double> finite_array(const json& v, const char* what) {
  if (!v.is_array()) throw FormatError(std::string("state: ") + what + " is not an array");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(finite(e, what));
  return out;
}

}  // namespace

compress::SelectionState parse_state(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("state: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "dfc-state-1") {
    throw FormatError("state: missing or unknown format tag");
  }
  compress::SelectionState s;
  try {
    s.scheme = linalg::parse_scheme(j.at("scheme").get<std::string>());
    s.iteration = j.at("iteration").get<std::int64_t>();
    s.mu = finite(j.at("mu"), "mu");
    const auto& units = j.at("units");
    if (!units.is_array() || units.empty()) throw FormatError("state: no units");
    for (const auto& e : units) {
      const auto mask = finite_array(e.at("mask"), "mask");
      std::vector<float> mf(mask.begin(), mask.end());
      s.masks.push_back(mf.empty() ? Tensor() : Tensor({static_cast<std::int64_t>(mf.size())}, mf));
      s.gammas.push_back(finite(e.at("gamma"), "gamma"));
      s.tau.push_back(finite(e.at("tau"), "tau"));
      s.original_spectra.push_back(finite_array(e.at("original_spectrum"), "original_spectrum"));
      s.spectra.push_back(finite_array(e.at("spectrum"), "spectrum"));
      if (s.gammas.back() < 0.0 || !(s.tau.back() > 0.0)) {
        throw FormatError("state: gamma must be >= 0 and tau > 0");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("state: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("state: ") + e.what());
  }
  return s;
}

void save_state(const compress::SelectionState& s, const std::string& path) {
  const auto text = serialize_state(s);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

compress::SelectionState load_state(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_state(std::string(bytes.begin(), bytes.end()));
}

}  // namespace dfc::io
