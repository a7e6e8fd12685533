#include "costroute/allocation_search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "costroute/error.hpp"
#include "costroute/log.hpp"
#include "costroute/parallel.hpp"

namespace costroute {

const char* bucket_name(Bucket b) noexcept {
  switch (b) {
    case Bucket::Easy: return "G_E";
    case Bucket::Medium: return "G_M";
    case Bucket::Hard: break;
  }
  return "G_H";
}

Bucket bucket_from_name(std::string_view name) {
  if (name == "G_E") return Bucket::Easy;
  if (name == "G_M") return Bucket::Medium;
  if (name == "G_H") return Bucket::Hard;
  fail(Errc::Parse, "unknown difficulty bucket '" + std::string(name) + "'");
}

Tier tier_for(Bucket b) noexcept {
  switch (b) {
    case Bucket::Easy: return Tier::Small;
    case Bucket::Medium: return Tier::Medium;
    case Bucket::Hard: break;
  }
  return Tier::Large;
}

void DifficultyConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::InvalidAlpha, "alpha must lie in (0, 1)");
  if (!(tau2 >= 0.0 && tau1 <= 1.0 && tau2 < tau1)) fail(Errc::InvalidThresholds, "need 0 <= tau2 < tau1 <= 1");
}

double nearest_rank_quantile(std::span<const double> values, double alpha) {
  if (values.empty()) fail(Errc::EmptyProbSequence, "no token probabilities");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::InvalidAlpha, "alpha must lie in (0, 1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(alpha * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

DifficultyEstimate estimate_difficulty(const TaskRecord& task, const Subtask& subtask, const TokenProbSource& source,
                                       double alpha) {
  const auto probs = source.token_probs(task, subtask);
  if (probs.empty()) fail(Errc::EmptyProbSequence, "subtask " + std::to_string(subtask.index) + " of " + task.task_id);
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) fail(Errc::InvalidProbability, "token probability outside [0, 1]");
  }
  DifficultyEstimate est;
  est.subtask_index = subtask.index;
  est.alpha = alpha;
  est.quantile_value = nearest_rank_quantile(probs, alpha);
  return est;
}

Bucket bucket_difficulty(double value, double tau1, double tau2) {
  if (!(tau2 < tau1)) fail(Errc::InvalidThresholds, "tau2 must be below tau1");
  if (value > tau1) return Bucket::Easy;
  if (value > tau2) return Bucket::Medium;
  return Bucket::Hard;
}

std::vector<DifficultyEstimate> estimate_all(const TaskRecord& task, const Decomposition& d,
                                             const TokenProbSource& source, const DifficultyConfig& cfg) {
  cfg.validate();
  std::vector<DifficultyEstimate> out;
  out.reserve(d.k());
  for (const auto& s : d.subtasks) {
    auto est = estimate_difficulty(task, s, source, cfg.alpha);
    est.bucket = bucket_difficulty(est.quantile_value, cfg.tau1, cfg.tau2);
    out.push_back(est);
  }
  return out;
}

AllocationScheme initial_scheme(std::span<const Bucket> buckets, const GroupedPool& grouped) {
  AllocationScheme scheme;
  for (auto b : buckets) scheme.assignments.push_back(medium_model(grouped.group(tier_for(b))).id);
  scheme.iteration = 0;
  return scheme;
}

namespace {

Tier lower(Tier t) { return static_cast<Tier>(static_cast<int>(t) - 1); }
Tier higher(Tier t) { return static_cast<Tier>(static_cast<int>(t) + 1); }

int id_sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

}  // namespace

SearchTrace grouped_search(const std::string& task_id, std::span<const Bucket> buckets, const GroupedPool& grouped,
                           const SchemeEvaluator& evaluate, int limit) {
  if (limit <= 0) fail(Errc::LimitZero, "search limit must be positive");
  if (limit > kMaxSearchLimit) fail(Errc::LimitTooLarge, "search limit is capped at 20");
  if (buckets.empty()) fail(Errc::InvalidArgument, "no subtasks to allocate for " + task_id);

  const std::size_t k = buckets.size();
  SearchTrace trace;
  std::map<std::vector<int>, SchemeOutcome> seen;
  std::optional<std::size_t> best;

  auto run = [&](const std::vector<int>& scheme) {
    SchemeOutcome o;
    try {
      o = evaluate(scheme);
    } catch (const Error& e) {
      log_warning("scheme evaluation for " + task_id + " failed: " + e.what());
      o = SchemeOutcome{};
    }
    AllocationScheme rec{task_id, scheme, o.acc, o.cost, trace.schemes.size()};
    trace.schemes.push_back(rec);
    if (o.acc) {
      const auto& b = best ? trace.schemes[*best] : rec;
      if (!best || o.cost < *b.cost || (o.cost == *b.cost && id_sum(scheme) < id_sum(b.assignments))) {
        best = trace.schemes.size() - 1;
      }
    }
    seen.emplace(scheme, o);
    return o;
  };

  std::vector<int> current = initial_scheme(buckets, grouped).assignments;
  SchemeOutcome outcome = run(current);
  std::vector<bool> frozen(k, false);
  std::optional<std::vector<int>> last_correct;

  for (;;) {
    std::vector<int> next = current;
    bool moved = false;

    if (outcome.acc) {
      last_correct = current;
      for (std::size_t i = 0; i < k; ++i) {
        if (frozen[i]) continue;
        if (next[i] > grouped.min_id(grouped.tier_of(next[i]))) {
          --next[i];
          moved = true;
        }
      }
      if (!moved) {
        for (std::size_t i = 0; i < k; ++i) {
          const Tier t = grouped.tier_of(next[i]);
          if (frozen[i] || t == Tier::Small) continue;
          next[i] = grouped.max_id(lower(t));
          moved = true;
        }
      }
      if (!moved) break;
    } else if (last_correct) {
      const auto& good = *last_correct;
      const std::size_t j = outcome.first_failed_step.value_or(0);
      if (outcome.first_failed_step && j < k && current[j] != good[j]) {
        next[j] = good[j];
        frozen[j] = true;
      } else {
        for (std::size_t i = 0; i < k; ++i) {
          if (current[i] != good[i]) {
            next[i] = good[i];
            frozen[i] = true;
          }
        }
      }
      if (next == good) {
        current = good;
        outcome = seen.at(good);
        continue;
      }
      moved = true;
    } else {
      const std::size_t from = std::min(outcome.first_failed_step.value_or(0), k - 1);
      auto step_up = [&](std::size_t start) {
        bool any = false;
        for (std::size_t i = start; i < k; ++i) {
          if (next[i] < grouped.max_id(grouped.tier_of(next[i]))) {
            ++next[i];
            any = true;
          }
        }
        return any;
      };
      auto promote = [&](std::size_t start) {
        bool any = false;
        for (std::size_t i = start; i < k; ++i) {
          const Tier t = grouped.tier_of(next[i]);
          if (t == Tier::Large) continue;
          next[i] = grouped.min_id(higher(t));
          any = true;
        }
        return any;
      };
      moved = step_up(from) || promote(from) || step_up(0) || promote(0);
      if (!moved) {
        trace.exhausted = true;  // every subtask already on the strongest model
        break;
      }
    }

    if (auto it = seen.find(next); it != seen.end()) {
      current = next;
      outcome = it->second;
      continue;
    }
    if (trace.schemes.size() >= static_cast<std::size_t>(limit)) {
      trace.exhausted = true;
      break;
    }
    current = next;
    outcome = run(current);
  }

  trace.result = best ? trace.schemes[*best] : trace.schemes.back();
  return trace;
}

SchemeEvaluator chain_evaluator(const TaskRecord& task, const Decomposition& d, const ExecutionContext& ctx) {
  return [&task, &d, ctx](const std::vector<int>& assignments) {
    auto trace = execute_chain(task, d, assignments, ctx);
    return SchemeOutcome{trace.acc, trace.cost, trace.first_failed_step};
  };
}

AllocBuildResult build_alloc_dataset(std::span<const TaskRecord> tasks, const Decomposer& decomposer,
                                     const TokenProbSource& probs, const GroupedPool& grouped,
                                     const ExecutionContext& ctx, const AllocBuildOptions& options) {
  options.difficulty.validate();
  if (options.limit <= 0) fail(Errc::LimitZero, "search limit must be positive");
  if (options.limit > kMaxSearchLimit) fail(Errc::LimitTooLarge, "search limit is capped at 20");

  struct Slot {
    bool ok = false;
    AllocDatasetEntry entry;
    SearchTrace trace;
  };
  std::vector<Slot> slots(tasks.size());
  ExecutionContext run_ctx = ctx;
  run_ctx.seed = options.seed;

  parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    auto& slot = slots[t];
    try {
      const Decomposition d = decomposer.decompose(task);
      const auto estimates = estimate_all(task, d, probs, options.difficulty);
      std::vector<Bucket> buckets;
      for (const auto& e : estimates) buckets.push_back(*e.bucket);
      slot.trace = grouped_search(task.task_id, buckets, grouped, chain_evaluator(task, d, run_ctx), options.limit);
      if (!slot.trace.result.acc.value_or(false)) {
        log_info("no correct allocation found for " + task.task_id);
        return;
      }
      slot.entry = AllocDatasetEntry{task.task_id, d.texts(), estimates, slot.trace.result.assignments};
      slot.ok = true;
    } catch (const Error& e) {
      log_warning("skipping " + task.task_id + ": " + e.what());
    }
  });

  AllocBuildResult result;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    if (slots[t].ok) {
      result.entries.push_back(std::move(slots[t].entry));
    } else {
      result.skipped_task_ids.push_back(tasks[t].task_id);
    }
    if (options.keep_traces) result.traces.push_back(std::move(slots[t].trace));
  }
  return result;
}

ordered_json to_json(const AllocDatasetEntry& entry) {
  ordered_json row;
  row["task_id"] = entry.task_id;
  row["subtasks"] = entry.subtasks;
  ordered_json buckets = ordered_json::array();
  ordered_json quantiles = ordered_json::array();
  for (const auto& e : entry.estimates) {
    buckets.push_back(bucket_name(e.bucket.value_or(Bucket::Hard)));
    quantiles.push_back(e.quantile_value);
  }
  row["buckets"] = std::move(buckets);
  row["quantiles"] = std::move(quantiles);
  row["labels"] = entry.labels;
  return row;
}

AllocDatasetEntry alloc_entry_from_json(const nlohmann::json& row) {
  try {
    AllocDatasetEntry e;
    e.task_id = row.at("task_id").get<std::string>();
    e.subtasks = row.at("subtasks").get<std::vector<std::string>>();
    const auto buckets = row.at("buckets").get<std::vector<std::string>>();
    const auto quantiles = row.at("quantiles").get<std::vector<double>>();
    e.labels = row.at("labels").get<std::vector<int>>();
    if (buckets.size() != e.subtasks.size() || quantiles.size() != e.subtasks.size() ||
        e.labels.size() != e.subtasks.size()) {
      fail(Errc::Parse, "allocation row " + e.task_id + " has mismatched array lengths");
    }
    for (std::size_t i = 0; i < e.subtasks.size(); ++i) {
      e.estimates.push_back(DifficultyEstimate{i, 0.0, quantiles[i], bucket_from_name(buckets[i])});
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::Parse, std::string("allocation dataset row: ") + ex.what());
  }
}

ordered_json to_json(const SearchTrace& trace) {
  auto scheme_json = [](const AllocationScheme& s) {
    ordered_json j;
    j["iteration"] = s.iteration;
    j["assignments"] = s.assignments;
    j["acc"] = s.acc.value_or(false) ? 1 : 0;
    j["cost_millicents"] = s.cost.value_or(Cost{}).millicents;
    return j;
  };
  ordered_json row;
  row["task_id"] = trace.result.task_id;
  ordered_json schemes = ordered_json::array();
  for (const auto& s : trace.schemes) schemes.push_back(scheme_json(s));
  row["schemes"] = std::move(schemes);
  row["result"] = scheme_json(trace.result);
  row["exhausted"] = trace.exhausted;
  return row;
}

}  // namespace costroute
