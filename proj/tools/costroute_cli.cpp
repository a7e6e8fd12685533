#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "costroute/costroute.h"

namespace {

enum class Kind { Str, Int, UInt, Real, Flag };

struct FlagSpec {
  const char* name;
  Kind kind;
  const char* help;
  std::vector<std::string> commands;
};

const std::vector<std::string> kAll = {"sim-gen", "decomp-dataset", "alloc-dataset", "search", "train", "route", "eval"};
const std::vector<std::string> kWithPool = {"decomp-dataset", "alloc-dataset", "search", "train", "route", "eval"};
const std::vector<std::string> kRouting = {"alloc-dataset", "search", "train", "route", "eval"};

const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs = {
      {"seed", Kind::UInt, "Seed for every random draw (default 0)", kAll},
      {"workers", Kind::UInt, "Worker threads (default 1)", kWithPool},
      {"out", Kind::Str, "Output file", {"sim-gen", "decomp-dataset", "alloc-dataset", "search", "route", "eval"}},
      {"n", Kind::UInt, "Number of simulated tasks (default 100)", {"sim-gen"}},
      {"k-min", Kind::Int, "Minimum latent subtasks per task (default 1)", {"sim-gen"}},
      {"k-max", Kind::Int, "Maximum latent subtasks per task (default 3)", {"sim-gen"}},
      {"dist", Kind::Str, "Difficulty distribution: uniform, uniform:LO,HI or point:V (default uniform)", {"sim-gen"}},
      {"pool", Kind::Str, "Model pool config (JSON)", kWithPool},
      {"sim-tasks", Kind::Str, "Simulated task file (JSONL); selects the simulator backend", kWithPool},
      {"tasks", Kind::Str, "Task file (JSONL {task_id, text, ground_truth}) for model endpoints", kWithPool},
      {"mode", Kind::Str, "Simulator mode: deterministic or sigmoid (default deterministic)", kWithPool},
      {"gamma", Kind::Real, "Sigmoid steepness (default 8)", kWithPool},
      {"endpoint", Kind::Str, "Override every model endpoint URL", kWithPool},
      {"record", Kind::Str, "Record model exchanges to this cassette", kWithPool},
      {"replay", Kind::Str, "Replay model exchanges from this cassette; no network access", kWithPool},
      {"max-retries", Kind::Int, "Retries per model request (default 3)", kWithPool},
      {"max-concurrent", Kind::UInt, "Concurrent requests per endpoint (default 4)", kWithPool},
      {"task-id", Kind::Str, "Only process this task", {"decomp-dataset", "alloc-dataset", "search", "route", "eval"}},
      {"m", Kind::UInt, "Decomposition candidates per task (default 4)",
       {"decomp-dataset", "alloc-dataset", "search", "train", "route", "eval"}},
      {"w-c", Kind::Real, "Score weight per subtask (default 1.0)",
       {"decomp-dataset", "eval"}},
      {"w-p", Kind::Real, "Score weight per evaluation-model token (default 0.01)",
       {"decomp-dataset", "eval"}},
      {"w-d", Kind::Real, "Score weight per incoherent pair (default 5.0)",
       {"decomp-dataset", "eval"}},
      {"baseline-model", Kind::Int, "Model id for correctness checks (default: pool eval model)",
       {"decomp-dataset", "eval"}},
      {"alpha", Kind::Real, "Token-probability quantile level (default 0.5)", kRouting},
      {"tau1", Kind::Real, "Easy threshold (default 0.75)", kRouting},
      {"tau2", Kind::Real, "Medium threshold (default 0.45)", kRouting},
      {"limit", Kind::Int, "Search evaluations per task, at most 20 (default 20)", kRouting},
      {"prm", Kind::Flag, "Review steps of models below the threshold with the strong model", kRouting},
      {"strong-model", Kind::Int, "Review model id (default: strongest model)", kRouting},
      {"threshold-model", Kind::Int, "Review threshold model id (default: weakest large-group model)", kRouting},
      {"decomp-dataset", Kind::Str, "Decomposition dataset (JSONL)", {"alloc-dataset", "search", "train", "route", "eval"}},
      {"alloc-dataset", Kind::Str, "Allocation dataset (JSONL)", {"train", "eval"}},
      {"search-out", Kind::Str, "Also write search traces here", {"alloc-dataset"}},
      {"decomp-policy", Kind::Str, "Decomposer policy checkpoint (output of train, input elsewhere)",
       {"alloc-dataset", "search", "train", "route", "eval"}},
      {"alloc-policy", Kind::Str, "Allocator policy checkpoint (output of train, input elsewhere)",
       {"train", "route", "eval"}},
      {"allocator", Kind::Str, "policy, search, top or fixed:ID (default: policy when given, else search)",
       {"route", "eval"}},
      {"confidence", Kind::Real, "Pick the smallest model whose cumulative policy probability reaches this (default 0: argmax)",
       {"route", "eval"}},
      {"trace-out", Kind::Str, "Also write routing traces here", {"eval"}},
      {"history", Kind::Str, "Training history output (JSONL)", {"train"}},
      {"rounds", Kind::UInt, "Alternating training rounds (default 6)", {"train"}},
      {"group-size", Kind::UInt, "Rollouts per group (default 8)", {"train"}},
      {"clip-eps", Kind::Real, "Clip epsilon (default 0.2)", {"train"}},
      {"kl-beta", Kind::Real, "KL weight (default 0.01)", {"train"}},
      {"lr", Kind::Real, "Learning rate (default 0.05)", {"train"}},
      {"iterations", Kind::UInt, "Data collections per round (default 4)", {"train"}},
      {"inner-steps", Kind::UInt, "Updates per collection (default 4)", {"train"}},
      {"tasks-per-iteration", Kind::UInt, "Tasks per collection (default 64)", {"train"}},
      {"sft-epochs", Kind::UInt, "Warm-start epochs on the datasets (default 1500)", {"train"}},
      {"sft-lr", Kind::Real, "Warm-start Adam step size (default 0.05)", {"train"}},
  };
  return specs;
}

std::string key_of(std::string name) {
  for (auto& c : name) {
    if (c == '-') c = '_';
  }
  return name;
}

struct Values {
  std::map<std::string, std::string> str;
  std::map<std::string, std::int64_t> i64;
  std::map<std::string, std::uint64_t> u64;
  std::map<std::string, double> real;
  std::map<std::string, bool> flag;
};

void print_error(const std::string& command, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json s;
  s["command"] = command;
  s["status"] = "error";
  s["kind"] = kind;
  s["message"] = message;
  std::cout << s.dump() << std::endl;
  std::cerr << "costroute " << command << ": " << message << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware model routing: datasets, search, training, routing and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  int log_level = 2;
  app.add_option("--config", config_path, "JSON file of options; flags take precedence");
  app.add_option("--log-level", log_level, "0 debug, 1 info, 2 warning, 3 error, 4 off (default 2)")
      ->check(CLI::Range(0, 4));

  const std::map<std::string, std::string> descriptions = {
      {"sim-gen", "Generate simulated tasks"},
      {"decomp-dataset", "Build the decomposition dataset by rejection sampling"},
      {"alloc-dataset", "Build the allocation dataset with the grouped search"},
      {"search", "Run the grouped search and write its traces"},
      {"train", "Warm-start and co-train the decomposer and allocator policies"},
      {"route", "Route tasks and write traces"},
      {"eval", "Route tasks, compare with the strongest model alone, and write a report"},
  };

  Values values;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::vector<std::pair<const FlagSpec*, CLI::Option*>>> registered;
  for (const auto& name : kAll) subs[name] = app.add_subcommand(name, descriptions.at(name));
  for (const auto& spec : flag_specs()) {
    const std::string key = key_of(spec.name);
    const std::string flag = std::string("--") + spec.name;
    for (const auto& cmd : spec.commands) {
      auto* sub = subs.at(cmd);
      CLI::Option* opt = nullptr;
      switch (spec.kind) {
        case Kind::Str: opt = sub->add_option(flag, values.str[key], spec.help); break;
        case Kind::Int: opt = sub->add_option(flag, values.i64[key], spec.help); break;
        case Kind::UInt: opt = sub->add_option(flag, values.u64[key], spec.help); break;
        case Kind::Real: opt = sub->add_option(flag, values.real[key], spec.help); break;
        case Kind::Flag: opt = sub->add_flag(flag, values.flag[key], spec.help); break;
      }
      registered[cmd].emplace_back(&spec, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  nlohmann::json options = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      print_error(command, "Usage", "cannot read config file " + config_path);
      return 2;
    }
    try {
      options = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      print_error(command, "Usage", std::string("config file is not valid JSON: ") + e.what());
      return 2;
    }
    if (!options.is_object()) {
      print_error(command, "Usage", "config file must hold a JSON object");
      return 2;
    }
  }
  for (const auto& [spec, opt] : registered[command]) {
    if (opt->count() == 0) continue;
    const std::string key = key_of(spec->name);
    switch (spec->kind) {
      case Kind::Str: options[key] = values.str[key]; break;
      case Kind::Int: options[key] = values.i64[key]; break;
      case Kind::UInt: options[key] = values.u64[key]; break;
      case Kind::Real: options[key] = values.real[key]; break;
      case Kind::Flag: options[key] = values.flag[key]; break;
    }
  }

  cr_set_log_level(log_level);
  char* summary = nullptr;
  const cr_status st = cr_run_command(command.c_str(), options.dump().c_str(), &summary);
  if (st != CR_OK) {
    print_error(command, cr_last_error_kind(), cr_last_error());
    cr_string_free(summary);
    return st == CR_ERR_USAGE ? 2 : 1;
  }
  std::cout << summary << std::endl;
  cr_string_free(summary);
  return 0;
}
