// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// dfc: command-line pipeline for structured compression.
//
//   dfc synth-data     --out PREFIX
//   dfc train-baseline --data TRAIN [--val VAL] --model-out M
//   dfc compress       --model-in M --data TRAIN --state-out S
//   dfc realize        --model-in M --state S --model-out C
//   dfc finetune       --model-in C --data TRAIN [--val VAL] --model-out F
//   dfc eval           --model-in F --data TEST
//   dfc report         --log RUN.log [--out RUN.csv]
//
// Every command prints one `RESULT key=value ...` line on stdout. Commands that
// take --log append JSON lines to it, the first echoing the effective config.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfc/compressor.hpp"
#include "dfc/config.hpp"
#include "dfc/io.hpp"
#include "dfc/realizer.hpp"
#include "dfc/state_io.hpp"

namespace {

using nlohmann::json;
using namespace dfc;

constexpr const char* kDefaultArch = "c32-p2-c64-c80-p2-c128";
constexpr int kBaselineEpochs = 40;
constexpr double kBaselineLr = 0.01;
constexpr int kFinetuneEpochs = 100;
constexpr double kFinetuneLr = 0.001;

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

class Result {
 public:
  explicit Result(std::string command) { add("cmd", std::move(command)); }
  Result& add(const std::string& k, const std::string& v) {
    items_.emplace_back(k, v);
    return *this;
  }
  Result& add(const std::string& k, double v) { return add(k, num(v)); }
  Result& add(const std::string& k, std::int64_t v) { return add(k, std::to_string(v)); }
  Result& add(const std::string& k, int v) { return add(k, std::to_string(v)); }
  std::string line() const {
    std::string s = "RESULT";
    for (const auto& [k, v] : items_) s += " " + k + "=" + v;
    return s;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

class RunLog {
 public:
  void open(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open log file " + path);
  }
  void write(const json& j) {
    if (!out_.is_open()) return;
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

/// Options shared by commands that read a RunConfig.
struct ConfigOptions {
  std::string config_path;
  std::string log_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--log", log_path, "JSON-lines run log");
    for (const auto& key : config::known_keys()) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + key;
      if (dashed != key) names += ",--" + dashed;
      flags[key] = app->add_option(names, overrides[key], "override config key " + key);
    }
  }

  config::RunConfig resolve() const {
    config::RunConfig cfg;
    if (!config_path.empty()) cfg = config::load(config_path);
    for (const auto& [key, opt] : flags)
      if (opt->count() > 0) cfg.set(key, overrides.at(key));
    return cfg;
  }
};

json config_json(const std::string& command, const config::RunConfig& cfg) {
  json c = json::object();
  for (const auto& [k, v] : cfg.entries()) c[k] = v;
  return json{{"type", "config"}, {"command", command}, {"config", c}};
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

io::Dataset load_data(const std::string& path, const model::ModelGraph* m) {
  auto d = io::load_dataset(path);
  if (m && (d.channels != m->input.channels || d.height != m->input.height ||
            d.width != m->input.width || d.classes != m->input.classes)) {
    throw std::invalid_argument("dataset " + path + " is " + std::to_string(d.channels) + "x" +
                                std::to_string(d.height) + "x" + std::to_string(d.width) + " with " +
                                std::to_string(d.classes) + " classes, model expects " +
                                std::to_string(m->input.channels) + "x" +
                                std::to_string(m->input.height) + "x" +
                                std::to_string(m->input.width) + " with " +
                                std::to_string(m->input.classes));
  }
  return d;
}

void log_training(RunLog& log, const compress::TrainResult& r) {
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    json j{{"type", "epoch"}, {"epoch", e + 1}, {"train_loss", r.train_loss[e]}};
    if (e + 1 < r.val_accuracy.size()) j["val_accuracy"] = r.val_accuracy[e + 1];
    log.write(j);
  }
}

int run_synth(const std::string& out, std::uint64_t seed, const io::SynthSpec& base,
              std::int64_t n_train, std::int64_t n_val, std::int64_t n_test) {
  io::SynthSpec spec = base;
  spec.count = n_train + n_val + n_test;
  const auto syn = io::synth_dataset(seed, spec);
  const auto parts = io::split(syn.data, {n_train, n_val, n_test});
  Result r("synth-data");
  const char* names[] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    if (parts[i].count() == 0) continue;
    const std::string stem = out + "-" + names[i];
    io::save_dataset(parts[i], stem);
    r.add(names[i], parts[i].count());
    r.add(std::string(names[i]) + "_crc32",
          static_cast<std::int64_t>(io::crc32(parts[i].pixels)));
  }
  std::cout << r.line() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured compression by learned filter masks and SVD thresholds"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write train/val/test synthetic datasets");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  io::SynthSpec synth_spec;
  std::int64_t n_train = 2000, n_val = 500, n_test = 500;
  synth->add_option("--out", synth_out, "output prefix; writes PREFIX-{train,val,test}.{bin,meta}")
      ->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--train", n_train)->check(CLI::NonNegativeNumber);
  synth->add_option("--val", n_val)->check(CLI::NonNegativeNumber);
  synth->add_option("--test", n_test)->check(CLI::NonNegativeNumber);
  synth->add_option("--channels", synth_spec.channels);
  synth->add_option("--height", synth_spec.height);
  synth->add_option("--width", synth_spec.width);
  synth->add_option("--classes", synth_spec.classes);
  synth->add_option("--noise", synth_spec.noise);
  synth->add_option("--separation", synth_spec.separation);
  synth->add_option("--smoothing", synth_spec.smoothing);

  // train-baseline
  auto* tb = app.add_subcommand("train-baseline", "Train a dense network from scratch");
  ConfigOptions tb_cfg;
  tb_cfg.attach(tb);
  std::string tb_data, tb_val, tb_out, tb_arch = kDefaultArch;
  tb->add_option("--data", tb_data, "training set")->required();
  tb->add_option("--val", tb_val, "validation set for best-snapshot selection");
  tb->add_option("--model-out", tb_out)->required();
  tb->add_option("--arch", tb_arch, "architecture string, e.g. c32-p2-c64-c80-p2-c128");

  // compress
  auto* cp = app.add_subcommand("compress", "Learn filter masks and thresholds under the budget");
  ConfigOptions cp_cfg;
  cp_cfg.attach(cp);
  std::string cp_model, cp_data, cp_state;
  cp->add_option("--model-in", cp_model)->required()->check(CLI::ExistingFile);
  cp->add_option("--data", cp_data)->required();
  cp->add_option("--state-out", cp_state)->required();

  // realize
  auto* rz = app.add_subcommand("realize", "Build the pruned and factorized network");
  ConfigOptions rz_cfg;
  rz_cfg.attach(rz);
  std::string rz_model, rz_state, rz_out, rz_report;
  rz->add_option("--model-in", rz_model)->required()->check(CLI::ExistingFile);
  rz->add_option("--state", rz_state)->required()->check(CLI::ExistingFile);
  rz->add_option("--model-out", rz_out)->required();
  rz->add_option("--report", rz_report, "write the per-layer plan here");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Train every remaining weight of a network");
  ConfigOptions ft_cfg;
  ft_cfg.attach(ft);
  std::string ft_model, ft_data, ft_val, ft_out;
  ft->add_option("--model-in", ft_model)->required()->check(CLI::ExistingFile);
  ft->add_option("--data", ft_data)->required();
  ft->add_option("--val", ft_val);
  ft->add_option("--model-out", ft_out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Classification accuracy on a dataset");
  std::string ev_model, ev_data, ev_confusion;
  ev->add_option("--model-in", ev_model)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--confusion", ev_confusion, "write the confusion matrix as CSV");

  // report
  auto* rp = app.add_subcommand("report", "Convert a compress log to CSV");
  std::string rp_log, rp_out;
  rp->add_option("--log", rp_log)->required()->check(CLI::ExistingFile);
  rp->add_option("--out", rp_out, "CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return run_synth(synth_out, synth_seed, synth_spec, n_train, n_val, n_test);
    }

    if (tb->parsed()) {
      const auto cfg = tb_cfg.resolve();
      RunLog log;
      log.open(tb_cfg.log_path);
      log.write(config_json("train-baseline", cfg));
      const auto train = io::load_dataset(tb_data);
      model::InputSpec in{train.channels, train.height, train.width, train.classes};
      auto m = model::build_model(tb_arch, in);
      model::init_weights(m, cfg.seed);
      std::optional<io::Dataset> val;
      if (!tb_val.empty()) val = load_data(tb_val, &m);
      const auto res = compress::train(m, train, val ? &*val : nullptr,
                                       cfg.train_config(kBaselineEpochs, kBaselineLr));
      log_training(log, res);
      io::save_model(res.model, tb_out);
      Result r("train-baseline");
      r.add("arch", tb_arch).add("params", model::param_count(res.model));
      r.add("flops", model::count_flops(res.model)).add("best_epoch", res.best_epoch);
      if (val) r.add("val_accuracy", res.val_accuracy[res.best_epoch]);
      r.add("train_accuracy", compress::evaluate(res.model, train).accuracy);
      r.add("weight_hash", hex64(io::weight_hash(res.model)));
      std::cout << r.line() << std::endl;
      return 0;
    }

    if (cp->parsed()) {
      const auto cfg = cp_cfg.resolve();
      const auto ccfg = cfg.compress_config(2);
      RunLog log;
      log.open(cp_cfg.log_path);
      log.write(config_json("compress", cfg));
      const auto m = io::load_model(cp_model);
      const auto train = load_data(cp_data, &m);
      const auto hash_before = io::weight_hash(m);
      compress::CompressResult res;
      try {
        res = compress::compress(m, train, ccfg, [&](const compress::IterationRecord& rec) {
          log.write(json{{"type", "iteration"},
                         {"iteration", rec.iteration},
                         {"loss", rec.loss},
                         {"penalty", rec.penalty},
                         {"flop_ratio", rec.flop_ratio},
                         {"mu", rec.mu},
                         {"wall_ms", rec.wall_ms}});
        });
      } catch (const compress::DivergenceError& e) {
        io::save_state(e.last_good(), cp_state + ".last_good");
        throw std::runtime_error(std::string(e.what()) + "; last good state written to " +
                                 cp_state + ".last_good");
      }
      if (io::weight_hash(m) != hash_before) {
        throw std::logic_error("compress modified the frozen weights");
      }
      for (const auto& w : res.warnings) {
        std::cerr << "warning: " << w << '\n';
        log.write(json{{"type", "warning"}, {"message", w}});
      }
      io::save_state(res.state, cp_state);
      const auto hard = realize::realize(m, res.state);
      const auto gates = compress::gate_values(res.state, ccfg.schedule.alpha);
      std::int64_t saturated = 0;
      for (double g : gates) saturated += (g <= 1e-3 || g >= 1.0 - 1e-3) ? 1 : 0;
      Result r("compress");
      r.add("budget", ccfg.budget.target).add("flop_ratio", res.soft_ratio);
      r.add("hard_ratio", hard.flop_ratio());
      r.add("status", res.status == compress::RunStatus::kConverged ? "converged" : "restart_cap");
      r.add("passes", res.passes).add("iterations", static_cast<std::int64_t>(res.log.size()));
      r.add("saturated", gates.empty() ? 1.0 : static_cast<double>(saturated) / gates.size());
      r.add("weight_hash", hex64(hash_before));
      log.write(json{{"type", "summary"}, {"result", r.line()}});
      std::cout << r.line() << std::endl;
      return 0;
    }

    if (rz->parsed()) {
      const auto cfg = rz_cfg.resolve();
      RunLog log;
      log.open(rz_cfg.log_path);
      log.write(config_json("realize", cfg));
      const auto m = io::load_model(rz_model);
      const auto state = io::load_state(rz_state);
      realize::RealizeOptions opts;
      opts.shrink = cfg.shrink;
      const auto res = realize::realize(m, state, opts);
      io::save_model(res.model, rz_out);
      const auto plan = realize::plan_report(res);
      if (!rz_report.empty()) {
        io::write_file(rz_report,
                       std::span(reinterpret_cast<const std::uint8_t*>(plan.data()), plan.size()));
      } else {
        std::cerr << plan;
      }
      for (const auto& w : res.warnings) log.write(json{{"type", "warning"}, {"message", w}});
      int decomposed = 0;
      for (const auto& p : res.plan) decomposed += p.decomposed ? 1 : 0;
      Result r("realize");
      r.add("flop_ratio", res.flop_ratio()).add("flops", res.flops);
      r.add("dense_flops", res.dense_flops).add("params", res.params);
      r.add("param_ratio", res.param_ratio()).add("decomposed", decomposed);
      r.add("warnings", static_cast<int>(res.warnings.size()));
      r.add("weight_hash", hex64(io::weight_hash(res.model)));
      std::cout << r.line() << std::endl;
      return 0;
    }

    if (ft->parsed()) {
      const auto cfg = ft_cfg.resolve();
      RunLog log;
      log.open(ft_cfg.log_path);
      log.write(config_json("finetune", cfg));
      const auto m = io::load_model(ft_model);
      const auto train = load_data(ft_data, &m);
      std::optional<io::Dataset> val;
      if (!ft_val.empty()) val = load_data(ft_val, &m);
      const auto res = compress::train(m, train, val ? &*val : nullptr,
                                       cfg.train_config(kFinetuneEpochs, kFinetuneLr));
      log_training(log, res);
      io::save_model(res.model, ft_out);
      Result r("finetune");
      r.add("best_epoch", res.best_epoch);
      if (val) {
        r.add("val_accuracy_before", res.val_accuracy.front());
        r.add("val_accuracy", res.val_accuracy[res.best_epoch]);
      }
      r.add("weight_hash", hex64(io::weight_hash(res.model)));
      std::cout << r.line() << std::endl;
      return 0;
    }

    if (ev->parsed()) {
      const auto m = io::load_model(ev_model);
      const auto data = load_data(ev_data, &m);
      const auto res = compress::evaluate(m, data);
      if (!ev_confusion.empty()) {
        std::ostringstream os;
        for (const auto& row : res.confusion) {
          for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
          os << '\n';
        }
        const auto text = os.str();
        io::write_file(ev_confusion,
                       std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      }
      Result r("eval");
      r.add("accuracy", res.accuracy).add("correct", res.correct).add("total", res.total);
      r.add("flops", model::count_flops(m)).add("params", model::param_count(m));
      std::cout << r.line() << std::endl;
      return 0;
    }

    if (rp->parsed()) {
      std::ifstream in(rp_log, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open log " + rp_log);
      std::stringstream ss;
      ss << in.rdbuf();
      const std::string text = ss.str();
      std::ostringstream csv;
      csv << "iteration,loss,penalty,flop_ratio,mu\n";
      std::int64_t rows = 0, line_no = 0;
      std::size_t pos = 0;
      while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool complete = nl != std::string::npos;
        const std::string line = text.substr(pos, complete ? nl - pos : std::string::npos);
        pos = complete ? nl + 1 : text.size();
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception&) {
          // A run may still be appending its last line.
          if (!complete) break;
          throw std::runtime_error(rp_log + ":" + std::to_string(line_no) + ": not a JSON record");
        }
        if (j.value("type", "") != "iteration") continue;
        csv << j.at("iteration").get<std::int64_t>() << ',' << num(j.at("loss").get<double>())
            << ',' << num(j.at("penalty").get<double>()) << ','
            << num(j.at("flop_ratio").get<double>()) << ',' << num(j.at("mu").get<double>())
            << '\n';
        ++rows;
      }
      Result r("report");
      r.add("rows", rows);
      if (rp_out.empty()) {
        std::cout << csv.str();
        std::cerr << r.line() << std::endl;
      } else {
        const auto t = csv.str();
        io::write_file(rp_out, std::span(reinterpret_cast<const std::uint8_t*>(t.data()), t.size()));
        std::cout << r.line() << std::endl;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
