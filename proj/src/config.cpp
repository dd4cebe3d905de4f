// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dfc::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) {
    throw std::invalid_argument("config: bad value '" + v + "' for " + key);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw std::invalid_argument("config: non-finite value for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string& k, double RunConfig::*f) {
      t[k] = [f](RunConfig& c, const std::string& key, const std::string& v) {
        c.*f = parse_number<double>(key, v);
      };
    };
    real("budget", &RunConfig::budget);
    real("lambda", &RunConfig::lambda);
    real("tau_c", &RunConfig::tau_c);
    real("mu0", &RunConfig::mu0);
    real("alpha", &RunConfig::alpha);
    real("beta", &RunConfig::beta);
    real("epsilon", &RunConfig::epsilon);
    real("mask_lr", &RunConfig::mask_lr);
    real("threshold_lr_scale", &RunConfig::threshold_lr_scale);
    real("momentum", &RunConfig::momentum);
    real("weight_decay", &RunConfig::weight_decay);
    t["epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.epochs = parse_number<int>(k, v);
    };
    t["batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.batch_size = parse_number<int>(k, v);
    };
    t["restart_cap"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.restart_cap = parse_number<int>(k, v);
    };
    t["lr"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.lr = parse_number<double>(k, v);
    };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_number<std::uint64_t>(k, v);
    };
    t["scheme"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.scheme = linalg::parse_scheme(v);
    };
    t["schedule_on"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.schedule_on = parse_bool(k, v);
    };
    t["count_mode"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.count_mode = budget::parse_count_mode(v);
    };
    t["svd_grad"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.svd_grad = linalg::parse_svd_grad_mode(v);
    };
    t["schedule_index"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.schedule_index = compress::parse_schedule_index(v);
    };
    t["shrink"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.shrink = parse_bool(k, v);
    };
    t["augment"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.augment = parse_bool(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second(*this, key, trim(value));
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  return {
      {"budget", fmt(budget)},
      {"lambda", fmt(lambda)},
      {"tau_c", fmt(tau_c)},
      {"mu0", fmt(mu0)},
      {"alpha", fmt(alpha)},
      {"beta", fmt(beta)},
      {"epsilon", fmt(epsilon)},
      {"epochs", epochs ? std::to_string(*epochs) : "default"},
      {"batch_size", std::to_string(batch_size)},
      {"lr", lr ? fmt(*lr) : "default"},
      {"seed", std::to_string(seed)},
      {"scheme", linalg::to_string(scheme)},
      {"schedule_on", schedule_on ? "true" : "false"},
      {"mask_lr", fmt(mask_lr)},
      {"threshold_lr_scale", fmt(threshold_lr_scale)},
      {"momentum", fmt(momentum)},
      {"weight_decay", fmt(weight_decay)},
      {"restart_cap", std::to_string(restart_cap)},
      {"count_mode", budget::to_string(count_mode)},
      {"svd_grad", linalg::to_string(svd_grad)},
      {"schedule_index", compress::to_string(schedule_index)},
      {"shrink", shrink ? "true" : "false"},
      {"augment", augment ? "true" : "false"},
  };
}

compress::CompressConfig RunConfig::compress_config(int default_epochs) const {
  compress::CompressConfig c;
  c.budget.target = budget;
  c.budget.lambda = lambda;
  c.budget.tau_c = tau_c;
  c.schedule.mu0 = mu0;
  c.schedule.alpha = alpha;
  c.schedule.beta = beta;
  c.schedule.enabled = schedule_on;
  c.epochs = epochs.value_or(default_epochs);
  c.batch_size = batch_size;
  c.epsilon = epsilon;
  c.restart_cap = restart_cap;
  c.mask_lr = mask_lr;
  c.threshold_lr_scale = threshold_lr_scale;
  c.momentum = momentum;
  c.scheme = scheme;
  c.count_mode = count_mode;
  c.svd_grad = svd_grad;
  c.schedule_index = schedule_index;
  c.seed = seed;
  c.validate();
  return c;
}

compress::TrainConfig RunConfig::train_config(int default_epochs, double default_lr) const {
  compress::TrainConfig t;
  t.epochs = epochs.value_or(default_epochs);
  t.batch_size = batch_size;
  t.lr = lr.value_or(default_lr);
  t.momentum = momentum;
  t.weight_decay = weight_decay;
  t.seed = seed;
  t.augment_flip = augment;
  t.augment_crop = augment;
  if (t.epochs < 0 || t.batch_size < 1 || !(t.lr >= 0.0)) {
    throw std::invalid_argument("config: need epochs >= 0, batch_size >= 1, lr >= 0");
  }
  return t;
}

void apply_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": expected key=value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": " + e.what());
    }
  }
}

RunConfig load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig cfg;
  apply_text(cfg, ss.str());
  return cfg;
}

}  // namespace dfc::config
