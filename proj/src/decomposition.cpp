#include "costroute/decomposition.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

#include "costroute/error.hpp"
#include "costroute/log.hpp"
#include "costroute/parallel.hpp"
#include "costroute/rng.hpp"

namespace costroute {

void ScoreWeights::validate() const {
  for (double w : {w_c, w_p, w_d}) {
    if (!(w > 0.0) || !std::isfinite(w)) fail(Errc::InvalidWeights, "score weights must be finite and > 0");
  }
}

double compute_score(const Decomposition& d, const ScoreWeights& w) {
  w.validate();
  if (!d.coe_pairs) fail(Errc::MissingCoherence, "decomposition of " + d.task_id + " has no coherence count");
  std::int64_t tokens = 0;
  for (const auto& s : d.subtasks) {
    if (!s.token_count_eval) fail(Errc::MissingTokenCounts, "subtask " + std::to_string(s.index) + " of " + d.task_id);
    tokens += *s.token_count_eval;
  }
  return w.w_c * static_cast<double>(d.k()) + w.w_p * static_cast<double>(tokens) +
         w.w_d * static_cast<double>(*d.coe_pairs);
}

double score_decomposition(Decomposition& d, const ScoreWeights& w) {
  const double s = compute_score(d, w);
  d.score = s;
  return s;
}

int evaluate_coherence(Decomposition& d, const TaskRecord& task, const CoherenceJudge& judge) {
  if (d.subtasks.empty()) fail(Errc::InvalidArgument, "decomposition of " + d.task_id + " has no subtasks");
  int flagged = 0;
  for (std::size_t j = 0; j + 1 < d.k(); ++j) {
    if (judge.unrelated(task.text, d.subtasks[j].text, d.subtasks[j + 1].text)) ++flagged;
  }
  d.coe_pairs = flagged;
  return flagged;
}

namespace {

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "the",  "and",  "or",   "of",   "to",   "in",    "on",   "at",   "for",   "with",
      "by",   "from", "into", "onto", "as",   "is",   "are",  "was",   "were", "be",   "been",  "it",
      "its",  "this", "that", "these", "those", "then", "than", "if",  "so",   "do",   "does",  "we",
      "you",  "i",    "our",  "your", "their", "them", "they", "he",   "she",  "his",  "her",   "not",
      "no",   "yes",  "all",  "any",  "each", "which", "what", "how",  "about", "up",  "out",   "over",
      "using", "use", "step", "next", "first", "now"};
  return words;
}

}  // namespace

std::vector<std::string> content_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stop_words().contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

bool LexicalJudge::unrelated(std::string_view, std::string_view first, std::string_view second) const {
  const auto a = content_tokens(first);
  const auto b = content_tokens(second);
  const std::set<std::string> lhs(a.begin(), a.end());
  for (const auto& tok : b)
    if (lhs.contains(tok)) return false;
  return true;
}

CorrectnessCheck check_correctness(const TaskRecord& task, Decomposition& d, const SubtaskExecutor& executor,
                                   const AnswerChecker& checker, int baseline_model_id, std::uint64_t seed) {
  CorrectnessCheck result;
  std::string upstream;
  for (auto& s : d.subtasks) {
    StepRequest req{&task, &s, d.k(), baseline_model_id, upstream, derive_seed(seed, hash_string(task.task_id), s.index)};
    try {
      auto step = executor.execute(req);
      s.token_count_eval = step.usage.total();
      upstream = std::move(step.output);
    } catch (const Error& e) {
      log_warning("correctness check of " + task.task_id + " step " + std::to_string(s.index) + ": " + e.what());
      result.executor_failed = true;
      s.token_count_eval = 0;
      upstream = std::string(kStepFailedMarker);
    }
  }
  result.correct = !result.executor_failed && checker.accepts(task, upstream);
  d.correctness = result.correct;
  return result;
}

std::size_t select_best_index(std::span<const Decomposition> samples) {
  if (samples.empty()) fail(Errc::EmptySampleSet, "no decomposition samples");
  bool any_correct = false;
  for (const auto& d : samples) {
    if (!d.score || !d.correctness) fail(Errc::Unscored, "sample of " + d.task_id + " lacks score or correctness");
    any_correct = any_correct || *d.correctness;
  }
  std::size_t best = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& d = samples[i];
    if (any_correct && !*d.correctness) continue;
    if (best == samples.size()) {
      best = i;
      continue;
    }
    const auto& b = samples[best];
    if (*d.score < *b.score ||
        (*d.score == *b.score &&
         (d.k() < b.k() || (d.k() == b.k() && d.generation_order < b.generation_order)))) {
      best = i;
    }
  }
  return best;
}

const Decomposition& select_best(std::span<const Decomposition> samples) {
  return samples[select_best_index(samples)];
}

DecompBuildResult build_decomp_dataset(std::span<const TaskRecord> tasks, const DecompositionGenerator& generator,
                                       const CoherenceJudge& judge, const SubtaskExecutor& executor,
                                       const AnswerChecker& checker, const DecompBuildOptions& options) {
  if (options.samples_per_task < 1) fail(Errc::InvalidArgument, "samples per task must be >= 1");
  options.weights.validate();

  struct Slot {
    bool ok = false;
    DecompDatasetEntry entry;
    std::vector<Decomposition> candidates;
  };
  std::vector<Slot> slots(tasks.size());

  parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    std::vector<Decomposition> samples;
    try {
      samples = generator.generate(task, options.samples_per_task);
    } catch (const Error& e) {
      log_warning("skipping " + task.task_id + ": " + e.what());
      return;
    }
    if (samples.empty()) {
      log_warning("skipping " + task.task_id + ": generator returned no samples");
      return;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto& d = samples[i];
      d.generation_order = i;
      evaluate_coherence(d, task, judge);
      check_correctness(task, d, executor, checker, options.baseline_model_id, options.seed);
      score_decomposition(d, options.weights);
    }
    auto& slot = slots[t];
    slot.entry.task_id = task.task_id;
    slot.entry.task_text = task.text;
    slot.entry.chosen = samples[select_best_index(samples)];
    slot.entry.rejected_count = samples.size() - 1;
    slot.entry.weights = options.weights;
    if (options.keep_candidates) slot.candidates = std::move(samples);
    slot.ok = true;
  });

  DecompBuildResult result;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    if (!slots[t].ok) {
      result.skipped_task_ids.push_back(tasks[t].task_id);
      continue;
    }
    result.entries.push_back(std::move(slots[t].entry));
    if (options.keep_candidates) result.candidates.push_back(std::move(slots[t].candidates));
  }
  return result;
}

ordered_json to_json(const DecompDatasetEntry& entry) {
  const auto& d = entry.chosen;
  std::int64_t tokens = 0;
  for (const auto& s : d.subtasks) tokens += s.token_count_eval.value_or(0);
  ordered_json row;
  row["task_id"] = entry.task_id;
  row["task"] = entry.task_text;
  row["subtasks"] = d.texts();
  row["k"] = d.k();
  row["tokens_total"] = tokens;
  row["coe_pairs"] = d.coe_pairs.value_or(0);
  row["correctness"] = d.correctness.value_or(false) ? 1 : 0;
  row["score"] = d.score.value_or(0.0);
  ordered_json w;
  w["w_c"] = entry.weights.w_c;
  w["w_p"] = entry.weights.w_p;
  w["w_d"] = entry.weights.w_d;
  row["weights"] = std::move(w);
  return row;
}

DecompDatasetEntry decomp_entry_from_json(const nlohmann::json& row) {
  try {
    DecompDatasetEntry e;
    e.task_id = row.at("task_id").get<std::string>();
    e.task_text = row.at("task").get<std::string>();
    e.chosen = make_decomposition(e.task_id, row.at("subtasks").get<std::vector<std::string>>());
    e.chosen.coe_pairs = row.at("coe_pairs").get<int>();
    e.chosen.correctness = row.at("correctness").get<int>() != 0;
    e.chosen.score = row.at("score").get<double>();
    const auto& w = row.at("weights");
    e.weights = ScoreWeights{w.at("w_c").get<double>(), w.at("w_p").get<double>(), w.at("w_d").get<double>()};
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::Parse, std::string("decomposition dataset row: ") + ex.what());
  }
}

}  // namespace costroute
