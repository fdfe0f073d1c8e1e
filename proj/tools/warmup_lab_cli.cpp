// warmup-lab: command-line front end over the C API.
//
//   warmup-lab run <config.toml> [--jobs N]
//   warmup-lab experiment <name> [--out DIR]
//   warmup-lab constants <problem.toml>
//   warmup-lab verify <problem.toml> [--cert H0,H1[,f*]] [--points N] [--seed S]
//   warmup-lab lemmas <problem.toml> [--points N] [--seed S]
//   warmup-lab report [ids...] [--root DIR] [--csv FILE]
//
// Exit codes: 0 success, 1 an experiment row or verification failed,
// 2 invalid input (config, problem file, unknown names), 3 runtime failure.

#include "warmup_lab/warmup_lab.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct StringDeleter {
  void operator()(char* s) const { wl_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ProblemDeleter {
  void operator()(wl_problem* p) const { wl_problem_free(p); }
};
using OwnedProblem = std::unique_ptr<wl_problem, ProblemDeleter>;

bool is_input_error(int status) {
  return status == WL_E_CONFIG || status == WL_E_INPUT || status == WL_E_IO || status == WL_E_NULL_ARGUMENT;
}

int report_failure(int status) {
  std::cerr << "warmup-lab: " << wl_last_error() << " [" << wl_status_name(status) << "]\n";
  return is_input_error(status) ? kExitInput : kExitRuntime;
}

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "warmup-lab: cannot open " << path << "\n";
    return false;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

int load_problem(const std::string& path, OwnedProblem& out) {
  std::string text;
  if (!read_file(path, text)) return kExitInput;
  wl_problem* p = nullptr;
  if (int st = wl_problem_from_toml(text.c_str(), path.c_str(), &p); st != WL_OK) return report_failure(st);
  out.reset(p);
  return 0;
}

bool parse_cert(const std::string& text, double cert[3]) {
  cert[2] = 0.0;
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  if (vals.size() < 2 || vals.size() > 3) return false;
  for (std::size_t i = 0; i < vals.size(); ++i) cert[i] = vals[i];
  return true;
}

int cmd_run(const std::string& config, unsigned jobs) {
  char* runs = nullptr;
  if (int st = wl_run_config_file(config.c_str(), jobs, &runs); st != WL_OK) return report_failure(st);
  OwnedString owned(runs);
  std::cout << runs << "\n";
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& out) {
  char* md = nullptr;
  int ok = 0;
  if (int st = wl_run_experiment(name.c_str(), out.c_str(), &md, &ok); st != WL_OK) return report_failure(st);
  OwnedString owned(md);
  std::cout << md;
  return ok ? 0 : kExitFailedCheck;
}

int cmd_constants(const std::string& path) {
  OwnedProblem p;
  if (int rc = load_problem(path, p)) return rc;
  char* json = nullptr;
  if (int st = wl_problem_constants_json(p.get(), &json); st != WL_OK) return report_failure(st);
  OwnedString owned(json);
  std::cout << json << "\n";
  return 0;
}

int cmd_verify(const std::string& path, const std::string& cert_text, long long points, unsigned long long seed) {
  double cert[3];
  if (!cert_text.empty() && !parse_cert(cert_text, cert)) {
    std::cerr << "warmup-lab: --cert expects H0,H1[,f*], got '" << cert_text << "'\n";
    return kExitInput;
  }
  OwnedProblem p;
  if (int rc = load_problem(path, p)) return rc;
  int64_t violations = 0;
  double worst = 0.0;
  if (int st = wl_problem_verify(p.get(), cert_text.empty() ? nullptr : cert, points, seed, &violations, &worst);
      st != WL_OK)
    return report_failure(st);
  std::cout << "{\"points\": " << points << ", \"violations\": " << violations << ", \"worst_ratio\": " << worst
            << ", \"pass\": " << (violations == 0 ? "true" : "false") << "}\n";
  return violations == 0 ? 0 : kExitFailedCheck;
}

int cmd_lemmas(const std::string& path, long long points, unsigned long long seed) {
  OwnedProblem p;
  if (int rc = load_problem(path, p)) return rc;
  char* csv = nullptr;
  if (int st = wl_problem_lemmas_csv(p.get(), points, seed, &csv); st != WL_OK) return report_failure(st);
  OwnedString owned(csv);
  std::cout << csv;
  return 0;
}

int cmd_report(const std::vector<std::string>& ids, const std::string& root, const std::string& csv_path) {
  std::vector<const char*> ptrs;
  for (const auto& id : ids) ptrs.push_back(id.c_str());
  char* resolved = nullptr;
  if (int st = wl_output_root(root.c_str(), &resolved); st != WL_OK) return report_failure(st);
  OwnedString owned_root(resolved);
  char *md = nullptr, *csv = nullptr, *warnings = nullptr;
  if (int st = wl_report(ptrs.data(), ptrs.size(), resolved, &md, &csv, &warnings); st != WL_OK)
    return report_failure(st);
  OwnedString a(md), b(csv), c(warnings);
  std::cout << md;
  if (std::string(warnings) != "[]") std::cerr << "warmup-lab: warnings " << warnings << "\n";
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) {
      std::cerr << "warmup-lab: cannot write " << csv_path << "\n";
      return kExitInput;
    }
    out << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warmup-lab: (H0, H1)-smoothness and step-size warm-up laboratory"};
  app.set_version_flag("--version", std::string(wl_version()));
  app.require_subcommand(1);

  std::string config, name, out = "runs", problem, cert, root = "runs", csv_path;
  unsigned jobs = 0;
  long long points = 500;
  unsigned long long seed = 0;
  std::vector<std::string> ids;

  auto* run = app.add_subcommand("run", "Run a TOML config (and its sweep)");
  run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs,-j", jobs, "Worker threads (0 = hardware threads)");

  auto* exp = app.add_subcommand("experiment", "Run a canned experiment and print its report");
  exp->add_option("name", name, "Experiment name")->required();
  exp->add_option("--out", out, "Output root (WARMUP_LAB_OUT overrides)");

  auto* constants = app.add_subcommand("constants", "Print the certificate and derived constants as JSON");
  constants->add_option("problem", problem, "Problem file")->required();

  auto* verify = app.add_subcommand("verify", "Check a certificate on region-sampled points");
  verify->add_option("problem", problem, "Problem file")->required();
  verify->add_option("--cert", cert, "Override certificate H0,H1[,f*]");
  verify->add_option("--points", points, "Number of sampled points")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Sampling seed");

  auto* lemmas = app.add_subcommand("lemmas", "Run the lemma checkers and print violations as CSV");
  lemmas->add_option("problem", problem, "Problem file")->required();
  lemmas->add_option("--points", points, "Number of sampled points")->check(CLI::PositiveNumber);
  lemmas->add_option("--seed", seed, "Sampling seed");

  auto* report = app.add_subcommand("report", "Aggregate run summaries into a markdown table");
  report->add_option("ids", ids, "Run ids");
  report->add_option("--root", root, "Runs directory (WARMUP_LAB_OUT overrides)");
  report->add_option("--csv", csv_path, "Write the per-step CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  if (*run) return cmd_run(config, jobs);
  if (*exp) return cmd_experiment(name, out);
  if (*constants) return cmd_constants(problem);
  if (*verify) return cmd_verify(problem, cert, points, seed);
  if (*lemmas) return cmd_lemmas(problem, points, seed);
  if (*report) return cmd_report(ids, root, csv_path);
  return kExitInput;
}
