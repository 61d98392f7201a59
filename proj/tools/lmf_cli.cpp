// lmf command-line driver. Links only the C interface.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lmf/lmf.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0, kExitCriteria = 1, kExitError = 2;

struct Failure {
  std::string message;
};

void check(lmf_status s) {
  if (s != LMF_OK) throw Failure{std::string(lmf_status_name(s)) + ": " + lmf_last_error()};
}

struct Str {
  char* p = nullptr;
  ~Str() { lmf_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

using Config = std::unique_ptr<lmf_config, decltype(&lmf_config_free)>;
using Report = std::unique_ptr<lmf_report, decltype(&lmf_report_free)>;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  unsigned workers = 0;
  std::string out;
  std::vector<std::string> overrides;
  std::size_t points = 401;
};

// Output files go only to fixed names directly inside the output directory.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {}
  bool enabled() const { return !dir_.empty(); }
  void write(const char* name, const std::string& content) const {
    if (!enabled()) return;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{"io: cannot create output directory '" + dir_.string() + "': " + ec.message()};
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    if (!f) throw Failure{"io: cannot write '" + p.string() + "'"};
  }
  std::string path(const char* name) const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{"io: cannot create output directory '" + dir_.string() + "': " + ec.message()};
    return (dir_ / name).string();
  }

 private:
  fs::path dir_;
};

Config load_config(const Options& o, bool allow_default) {
  lmf_config* raw = nullptr;
  std::vector<const char*> ov;
  for (const auto& s : o.overrides) ov.push_back(s.c_str());
  if (o.config.empty()) {
    if (!allow_default) throw Failure{"usage: --config is required for this subcommand"};
    if (!ov.empty()) {
      // overrides apply on top of the theorem 1 preset
      check(lmf_config_preset(1, &raw));
      Config base(raw, lmf_config_free);
      Str text;
      check(lmf_config_to_json(base.get(), &text.p));
      check(lmf_config_from_json(text.p, ov.data(), ov.size(), &raw));
    } else {
      check(lmf_config_preset(1, &raw));
    }
  } else {
    check(lmf_config_load(o.config.c_str(), ov.data(), ov.size(), &raw));
  }
  Config cfg(raw, lmf_config_free);
  if (o.has_seed) check(lmf_config_set_seed(cfg.get(), o.seed));
  check(lmf_config_set_workers(cfg.get(), o.workers));
  return cfg;
}

int run(const std::string& cmd, const Options& o) {
  const OutputDir out(o.out);
  Config cfg = load_config(o, cmd == "selftest");
  std::cerr << "lmf " << lmf_version() << ": " << cmd << "\n";

  if (cmd == "simulate") {
    if (!out.enabled()) throw Failure{"usage: simulate needs --out"};
    Str summary;
    check(lmf_simulate_to_file(cfg.get(), out.path("samples.bin").c_str(), &summary.p));
    out.write("report.json", summary.str() + "\n");
    std::cout << summary.str() << "\n";
    return kExitOk;
  }
  if (cmd == "stable-table") {
    Str csv;
    check(lmf_limit_table_csv(cfg.get(), o.points, &csv.p));
    out.write("stable_table.csv", csv.str());
    if (!out.enabled()) std::cout << csv.str();
    return kExitOk;
  }

  lmf_report* raw = nullptr;
  if (cmd == "constants")
    check(lmf_run_constants(cfg.get(), &raw));
  else if (cmd == "verify")
    check(lmf_run_verify(cfg.get(), &raw));
  else if (cmd == "selftest")
    check(lmf_run_selftest(cfg.get(), &raw));
  else if (cmd == "diagnose")
    check(lmf_run_diagnose(cfg.get(), &raw));
  else
    throw Failure{"usage: unknown subcommand '" + cmd + "'"};
  Report report(raw, lmf_report_free);

  Str json;
  check(lmf_report_json(report.get(), &json.p));
  out.write(cmd == "constants" ? "constants.json" : "report.json", json.str() + "\n");
  if (cmd == "verify" || cmd == "selftest") {
    Str csv;
    check(lmf_report_quantiles_csv(report.get(), &csv.p));
    out.write("quantiles.csv", csv.str());
  }
  std::cout << json.str() << "\n";
  const bool passed = lmf_report_passed(report.get()) != 0;
  if (!passed) std::cerr << "criteria unmet\n";
  return passed ? kExitOk : kExitCriteria;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-memory linear process functionals: limit constants and Monte Carlo verification", "lmf"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--seed", o.seed, "Master seed (overrides the config)")->each([&](const std::string&) { o.has_seed = true; });
  app.add_option("--workers", o.workers, "Worker threads (0: available parallelism)");
  app.add_option("--out", o.out, "Output directory; files are written only inside it");
  app.add_option("--override", o.overrides, "Config override KEY=VALUE, dotted keys (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--points", o.points, "stable-table: grid points per t")->check(CLI::Range(2, 1000000));
  app.add_subcommand("constants", "Compute limit constants and normalizers");
  app.add_subcommand("simulate", "Simulate paths of the largest N to samples.bin");
  app.add_subcommand("verify", "Monte Carlo verification of the limit marginals");
  app.add_subcommand("diagnose", "Decomposition rates and eta_K tail diagnostics");
  app.add_subcommand("stable-table", "Tabulate the limit law cdf and pdf per t");
  app.add_subcommand("selftest", "Run the statistics pipeline on draws from the limit law");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kExitError;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
  }
  return kExitError;
}
