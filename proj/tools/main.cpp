// nnse: run, attack, explore, coverage, export-smt.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nnse/analyses.hpp"
#include "nnse/error.hpp"
#include "nnse/report.hpp"
#include "nnse/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kNoneWithinBudget = 3, kInternal = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string model_dir;
  std::string input;
  std::string dataset_dir;
  std::string solver = "internal";
  double min = 0.0;
  double max = 255.0;
  std::size_t max_paths = 1000;
  std::size_t max_solver_calls = 100000;
  double wall_timeout = 60.0;
  double solver_timeout = 10.0;
  std::string out;
  std::string log = "info";
  std::vector<std::string> sym_pixels;
  std::vector<std::string> sym_params;
  std::optional<std::size_t> target;
};

// Fills fields present in a JSON config file; command-line flags applied
// afterwards take precedence.
void apply_config_file(const std::string& path, Config& cfg, const CLI::App& cmd) {
  std::ifstream in(path);
  if (!in) throw nnse::Error(nnse::ErrorCode::MissingFile, "config file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw nnse::Error(nnse::ErrorCode::MalformedJson, path + ": " + e.what());
  }
  auto take = [&](const char* key, const char* flag, auto& field) {
    if (!j.contains(key)) return;
    if (flag && cmd.get_option_no_throw(flag) && cmd.count(flag) > 0) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      throw nnse::Error(nnse::ErrorCode::MalformedJson, path + ": key '" + key + "': " + e.what());
    }
  };
  take("solver", "--solver", cfg.solver);
  take("min", "--min", cfg.min);
  take("max", "--max", cfg.max);
  take("max_paths", "--max-paths", cfg.max_paths);
  take("max_solver_calls", "--max-solver-calls", cfg.max_solver_calls);
  take("wall_timeout", "--timeout", cfg.wall_timeout);
  take("solver_timeout", "--solver-timeout", cfg.solver_timeout);
  take("out", "--out", cfg.out);
  take("log", "--log", cfg.log);
  if (j.contains("sym_pixels") && cmd.count("--sym-pixel") == 0) j.at("sym_pixels").get_to(cfg.sym_pixels);
  if (j.contains("sym_params") && cmd.count("--sym-param") == 0) j.at("sym_params").get_to(cfg.sym_params);
  if (j.contains("target") && cmd.count("--target") == 0) cfg.target = j.at("target").get<std::size_t>();
}

std::vector<std::size_t> parse_index_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": expected comma-separated non-negative integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty position");
  return out;
}

void validate(const Config& cfg) {
  if (!(cfg.min <= cfg.max)) throw UsageError("--min must not exceed --max");
  if (cfg.max_paths == 0 || cfg.max_solver_calls == 0 || !(cfg.wall_timeout > 0) || !(cfg.solver_timeout > 0)) {
    throw UsageError("budget values must be positive");
  }
  if (cfg.solver != "internal" && cfg.solver != "smtlib-export") {
    throw UsageError("--solver must be internal or smtlib-export");
  }
  if (!cfg.sym_pixels.empty() && !cfg.sym_params.empty()) {
    throw UsageError("--sym-pixel and --sym-param cannot be combined");
  }
}

nnse::SymbolicMarking build_marking(const Config& cfg, const nnse::Model& model) {
  const auto& dims = model.input_shape().dims();
  if (!cfg.sym_params.empty()) {
    std::vector<nnse::ParamPosition> positions;
    for (const auto& text : cfg.sym_params) {
      auto idx = parse_index_list(text, "--sym-param");
      if (idx.size() != 2) throw UsageError("--sym-param expects layer,offset");
      positions.push_back({idx[0], idx[1]});
    }
    return nnse::SymbolicMarking::params(std::move(positions), cfg.min, cfg.max);
  }
  std::vector<std::vector<std::size_t>> positions;
  for (const auto& text : cfg.sym_pixels) {
    auto idx = parse_index_list(text, "--sym-pixel");
    if (dims.size() == 3 && idx.size() == 2) idx.push_back(0);
    if (idx.size() != dims.size()) {
      throw UsageError("--sym-pixel " + text + " does not match input shape " + model.input_shape().to_string());
    }
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (idx[d] >= dims[d]) {
        throw UsageError("--sym-pixel " + text + " is outside input shape " + model.input_shape().to_string());
      }
    }
    positions.push_back(std::move(idx));
  }
  return nnse::SymbolicMarking::inputs(std::move(positions), cfg.min, cfg.max);
}

nnse::ExplorationBudget budget_of(const Config& cfg) {
  return {cfg.max_paths, cfg.max_solver_calls, cfg.wall_timeout};
}

void emit(const Config& cfg, const std::string& file_name, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / file_name;
  std::ofstream out(path);
  if (!out) throw nnse::Error(nnse::ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  spdlog::info("wrote {}", path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_run(const Config& cfg) {
  const nnse::Model model = nnse::load_model(cfg.model_dir);
  const nnse::Tensor input = nnse::read_tensor_csv(cfg.input, model.input_shape());
  const nnse::ForwardResult r = nnse::forward(model, input);
  spdlog::info("label {}", r.prediction.label);
  emit(cfg, "prediction.json", dump(nnse::to_json(r.prediction)));
  return kOk;
}

int cmd_attack(const Config& cfg) {
  const nnse::Model model = nnse::load_model(cfg.model_dir);
  const nnse::Tensor input = nnse::read_tensor_csv(cfg.input, model.input_shape());
  if (cfg.sym_pixels.empty() && cfg.sym_params.empty()) throw UsageError("attack needs --sym-pixel or --sym-param");
  nnse::AttackSpec spec;
  spec.marking = build_marking(cfg, model);
  spec.original = input;
  if (cfg.target) spec.goal = nnse::Targeted{*cfg.target};
  spec.budget = budget_of(cfg);
  spec.solver.timeout_seconds = cfg.solver_timeout;
  const auto vars = nnse::make_variables(model, spec.marking);

  const nnse::AttackResult result = nnse::attack(model, spec);
  json report = nnse::to_json(result, spec.marking, vars);
  if (const auto* f = std::get_if<nnse::Found>(&result.outcome)) {
    spdlog::info("found: label {} -> {} on path {}", f->original_label, f->new_label, f->path_index);
    if (!cfg.out.empty()) {
      fs::create_directories(cfg.out);
      nnse::write_tensor_csv(fs::path(cfg.out) / "adversarial.csv", f->adversarial);
      report["adversarial_csv"] = "adversarial.csv";
    }
  } else if (result.proven_robust()) {
    spdlog::info("robust: no feasible misclassification over {} paths", result.stats.paths_explored);
  } else {
    spdlog::warn("no counterexample within budget ({} paths explored)", result.stats.paths_explored);
  }
  emit(cfg, "attack.json", dump(report));
  return result.found() || result.proven_robust() ? kOk : kNoneWithinBudget;
}

int cmd_explore(const Config& cfg) {
  const nnse::Model model = nnse::load_model(cfg.model_dir);
  const nnse::Tensor input = nnse::read_tensor_csv(cfg.input, model.input_shape());
  const nnse::SymbolicMarking marking = build_marking(cfg, model);
  nnse::SolverOptions solver;
  solver.timeout_seconds = cfg.solver_timeout;
  const nnse::ExplorationResult result = nnse::explore_paths(model, marking, input, budget_of(cfg), solver);
  spdlog::info("{} paths{}", result.paths.size(), result.truncated ? " (truncated)" : "");
  if (cfg.solver == "smtlib-export") {
    for (std::size_t i = 0; i < result.paths.size(); ++i) {
      nnse::SolverSession session(result.paths[i].path_constraint.vars);
      session.push(result.paths[i].path_constraint.constraints);
      emit(cfg, "path_" + std::to_string(i) + ".smt2", session.export_smtlib());
    }
  }
  emit(cfg, "explore.json", dump(nnse::to_json(result)));
  return kOk;
}

int cmd_coverage(const Config& cfg) {
  const nnse::Model model = nnse::load_model(cfg.model_dir);
  if (!fs::is_directory(cfg.dataset_dir)) {
    throw nnse::Error(nnse::ErrorCode::MissingFile, "dataset directory not found: " + cfg.dataset_dir);
  }
  std::vector<nnse::Tensor> dataset;
  for (const auto& path : nnse::list_csv_files(cfg.dataset_dir)) {
    dataset.push_back(nnse::read_tensor_csv(path, model.input_shape()));
  }
  const nnse::CoverageReport report = nnse::coverage(model, dataset);
  spdlog::info("neuron coverage {:.4f} ({}/{}) over {} inputs", report.neuron_coverage, report.covered,
               report.neurons, report.inputs);
  emit(cfg, "coverage.json", dump(nnse::to_json(report)));
  return kOk;
}

int cmd_export_smt(const Config& cfg) {
  const nnse::Model model = nnse::load_model(cfg.model_dir);
  const nnse::Tensor input = nnse::read_tensor_csv(cfg.input, model.input_shape());
  const nnse::SymbolicMarking marking = build_marking(cfg, model);
  const nnse::PathResult path = nnse::symbolic_forward_concolic(model, input, marking);
  const std::size_t label = *path.predicted_label;

  std::vector<std::vector<nnse::LinearConstraint>> alternatives;
  const std::size_t classes = path.symbolic_logits.size();
  if (cfg.target && *cfg.target >= classes) throw UsageError("--target is out of range");
  for (std::size_t c = 0; c < classes; ++c) {
    if (c == label || (cfg.target && c != *cfg.target)) continue;
    if (auto cs = nnse::resolve(nnse::decision_constraint(path.symbolic_logits, c))) alternatives.push_back(*cs);
  }
  nnse::SolverSession session(path.path_constraint.vars);
  session.push(path.path_constraint.constraints);
  std::string script = "; concolic path of the seed input (label " + std::to_string(label) +
                       ") with the decision negated\n" + session.export_smtlib(alternatives);
  emit(cfg, "query.smt2", script);
  return kOk;
}

void setup_logging(const std::string& level_name) {
  auto logger = spdlog::stderr_color_mt("nnse");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const auto level = spdlog::level::from_str(level_name);
  if (level == spdlog::level::off && level_name != "off") {
    throw UsageError("unknown log level '" + level_name + "'");
  }
  spdlog::set_level(level);
}

}  // namespace

int main(int argc, char** argv) {
  Config cfg;
  if (const char* env = std::getenv("NNSE_LOG")) cfg.log = env;
  std::string config_path;

  CLI::App app{"Symbolic execution for feed-forward neural networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config; flags override its values");
    cmd->add_option("--out", cfg.out, "Output directory (default: JSON on stdout)");
    cmd->add_option("--log", cfg.log, "trace|debug|info|warn|error|off (also NNSE_LOG)");
  };
  auto add_marking = [&](CLI::App* cmd) {
    cmd->add_option("--sym-pixel", cfg.sym_pixels, "Symbolic input position r,c[,ch] (repeatable)");
    cmd->add_option("--sym-param", cfg.sym_params, "Symbolic parameter layer,offset (repeatable)");
    cmd->add_option("--min", cfg.min, "Lower bound of symbolic values");
    cmd->add_option("--max", cfg.max, "Upper bound of symbolic values");
    cmd->add_option("--solver", cfg.solver, "internal|smtlib-export");
    cmd->add_option("--solver-timeout", cfg.solver_timeout, "Seconds per solver check");
  };
  auto add_budget = [&](CLI::App* cmd) {
    cmd->add_option("--max-paths", cfg.max_paths);
    cmd->add_option("--max-solver-calls", cfg.max_solver_calls);
    cmd->add_option("--timeout", cfg.wall_timeout, "Wall-clock budget in seconds");
  };

  auto* run = app.add_subcommand("run", "Classify one input");
  run->add_option("model", cfg.model_dir, "Model directory")->required();
  run->add_option("input", cfg.input, "Input CSV")->required();
  add_common(run);

  auto* attack = app.add_subcommand("attack", "Search for an adversarial assignment of the symbolic values");
  attack->add_option("model", cfg.model_dir)->required();
  attack->add_option("input", cfg.input)->required();
  add_common(attack);
  add_marking(attack);
  add_budget(attack);
  attack->add_option("--target", cfg.target, "Required new label");

  auto* explore = app.add_subcommand("explore", "Enumerate feasible paths");
  explore->add_option("model", cfg.model_dir)->required();
  explore->add_option("input", cfg.input)->required();
  add_common(explore);
  add_marking(explore);
  add_budget(explore);

  auto* cov = app.add_subcommand("coverage", "Neuron coverage over a directory of CSV inputs");
  cov->add_option("model", cfg.model_dir)->required();
  cov->add_option("dataset", cfg.dataset_dir)->required();
  add_common(cov);

  auto* smt = app.add_subcommand("export-smt", "Write the seed path constraint with the decision negated");
  smt->add_option("model", cfg.model_dir)->required();
  smt->add_option("input", cfg.input)->required();
  add_common(smt);
  add_marking(smt);
  smt->add_option("--target", cfg.target, "Negate towards this class only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (!config_path.empty()) apply_config_file(config_path, cfg, *cmd);
    setup_logging(cfg.log);
    validate(cfg);
    if (cmd == run) return cmd_run(cfg);
    if (cmd == attack) return cmd_attack(cfg);
    if (cmd == explore) return cmd_explore(cfg);
    if (cmd == cov) return cmd_coverage(cfg);
    return cmd_export_smt(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const nnse::Error& e) {
    std::cerr << e.what() << "\n";
    switch (e.code()) {
      case nnse::ErrorCode::InvalidMarking:
      case nnse::ErrorCode::InvalidArgument:
        return kUsage;
      default:
        return kInput;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
