#include "costroute/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "costroute/error.hpp"
#include "costroute/parallel.hpp"

namespace costroute {

FeatureVector subtask_features(double quantile, Bucket bucket, std::size_t position, std::size_t chain_length,
                               std::size_t text_length) {
  FeatureVector x{};
  x[0] = std::clamp(quantile, 0.0, 1.0);
  x[1] = bucket == Bucket::Easy ? 1.0 : 0.0;
  x[2] = bucket == Bucket::Medium ? 1.0 : 0.0;
  x[3] = bucket == Bucket::Hard ? 1.0 : 0.0;
  x[4] = chain_length > 1 ? static_cast<double>(position) / static_cast<double>(chain_length - 1) : 0.0;
  x[5] = std::min(1.0, static_cast<double>(text_length) / 512.0);
  x[6] = 1.0;
  return x;
}

FeatureVector task_features(std::size_t text_length) {
  FeatureVector x{};
  x[5] = std::min(1.0, static_cast<double>(text_length) / 512.0);
  x[6] = 1.0;
  return x;
}

const char* action_kind_name(ActionKind kind) noexcept {
  return kind == ActionKind::Allocator ? "allocator" : "decomposer";
}

PolicyParams PolicyParams::zeros(ActionSpace space) {
  if (space.size < 1) fail(Errc::InvalidConfig, "action space must be non-empty");
  return PolicyParams{space, std::vector<double>(space.size * kFeatureDim, 0.0)};
}

std::vector<double> PolicyParams::logits(const FeatureVector& x) const {
  std::vector<double> z(actions(), 0.0);
  for (std::size_t a = 0; a < actions(); ++a) {
    double s = 0.0;
    for (std::size_t f = 0; f < kFeatureDim; ++f) s += at(a, f) * x[f];
    z[a] = s;
  }
  return z;
}

std::vector<double> PolicyParams::probs(const FeatureVector& x) const { return softmax(logits(x)); }

void PolicyParams::validate() const {
  if (action_space.size < 1) fail(Errc::InvalidConfig, "action space must be non-empty");
  if (weights.size() != action_space.size * kFeatureDim) fail(Errc::ShapeMismatch, "weight matrix has the wrong shape");
  for (double w : weights) {
    if (!std::isfinite(w)) fail(Errc::InvalidConfig, "policy weights must be finite");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::string format_checkpoint(const PolicyParams& params) {
  params.validate();
  ordered_json header;
  header["action_space"] = action_kind_name(params.action_space.kind);
  header["actions"] = params.actions();
  header["feature_dim"] = kFeatureDim;
  std::string out = header.dump() + "\n";
  char buf[32];
  for (std::size_t a = 0; a < params.actions(); ++a) {
    for (std::size_t f = 0; f < kFeatureDim; ++f) {
      std::snprintf(buf, sizeof buf, "%.17g", params.at(a, f));
      if (f) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

PolicyParams parse_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) fail(Errc::Parse, "empty policy checkpoint");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Parse, std::string("checkpoint header: ") + e.what());
  }
  ActionSpace space;
  try {
    const auto kind = header.at("action_space").get<std::string>();
    if (kind == "allocator") {
      space.kind = ActionKind::Allocator;
    } else if (kind == "decomposer") {
      space.kind = ActionKind::Decomposer;
    } else {
      fail(Errc::Parse, "unknown action space '" + kind + "'");
    }
    space.size = header.at("actions").get<std::size_t>();
    if (header.at("feature_dim").get<std::size_t>() != kFeatureDim) {
      fail(Errc::ShapeMismatch, "checkpoint feature dimension differs from " + std::to_string(kFeatureDim));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Parse, std::string("checkpoint header: ") + e.what());
  }
  auto params = PolicyParams::zeros(space);
  for (std::size_t a = 0; a < space.size; ++a) {
    if (!std::getline(in, line)) fail(Errc::Parse, "checkpoint is missing weight rows");
    std::istringstream row(line);
    for (std::size_t f = 0; f < kFeatureDim; ++f) {
      std::string tok;
      if (!(row >> tok)) fail(Errc::Parse, "checkpoint row " + std::to_string(a) + " is short");
      char* end = nullptr;
      params.at(a, f) = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail(Errc::Parse, "bad checkpoint value '" + tok + "'");
    }
  }
  params.validate();
  return params;
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, format_checkpoint(params));
}

PolicyParams load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

void GrpoConfig::validate() const {
  if (group_size < 2) fail(Errc::GroupTooSmall, "group size must be at least 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) fail(Errc::InvalidConfig, "clip epsilon must lie in (0, 1)");
  if (!(kl_beta >= 0.0)) fail(Errc::InvalidConfig, "KL weight must be non-negative");
  if (!(learning_rate > 0.0)) fail(Errc::InvalidConfig, "learning rate must be positive");
  if (iterations < 1 || inner_steps < 1 || tasks_per_iteration < 1) {
    fail(Errc::InvalidConfig, "iterations, inner steps and tasks per iteration must be positive");
  }
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) fail(Errc::GroupTooSmall, "advantages need at least two rollouts");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  }
  return adv;
}

double clipped_step_objective(double ratio, double adv, double eps) {
  if (!(ratio > 0.0)) fail(Errc::NonpositiveRatio, "probability ratio must be positive");
  return std::min(ratio * adv, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv);
}

double kl_penalty(std::span<const double> policy_probs, std::span<const double> ref_probs) {
  if (policy_probs.size() != ref_probs.size()) fail(Errc::SupportMismatch, "distributions differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < policy_probs.size(); ++i) {
    const double p = policy_probs[i];
    if (p <= 0.0) continue;
    if (!(ref_probs[i] > 0.0)) fail(Errc::SupportMismatch, "reference has no mass where the policy does");
    kl += p * std::log(p / ref_probs[i]);
  }
  return std::max(0.0, kl);
}

ObjectiveResult grpo_objective_and_gradient(std::span<const TrajectoryGroup> batch, const PolicyParams& params,
                                            const PolicyParams& ref, const GrpoConfig& cfg) {
  if (batch.empty()) fail(Errc::EmptyBatch, "no trajectory groups");
  if (ref.action_space != params.action_space) fail(Errc::ShapeMismatch, "reference policy has another action space");
  const std::size_t A = params.actions();
  ObjectiveResult res;
  res.gradient.assign(params.weights.size(), 0.0);
  std::vector<double> dz(A);
  std::size_t kl_steps = 0;

  const double group_w = 1.0 / static_cast<double>(batch.size());
  for (const auto& group : batch) {
    if (group.rollouts.empty()) fail(Errc::EmptyBatch, "group " + group.context_id + " has no rollouts");
    if (group.advantages.size() != group.rollouts.size()) {
      fail(Errc::ShapeMismatch, "group " + group.context_id + " needs one advantage per rollout");
    }
    const double rollout_w = group_w / static_cast<double>(group.rollouts.size());
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      const auto& rollout = group.rollouts[i];
      if (rollout.steps.empty()) fail(Errc::EmptyBatch, "rollout without steps in " + group.context_id);
      const double adv = group.advantages[i];
      const double w = rollout_w / static_cast<double>(rollout.steps.size());
      for (const auto& step : rollout.steps) {
        if (step.action >= A) fail(Errc::ShapeMismatch, "action outside the policy's action space");
        if (!std::isfinite(step.logprob_old)) fail(Errc::InvalidArgument, "old log-probability is not finite");
        const auto p = params.probs(step.features);
        const auto r = ref.probs(step.features);
        const double ratio = std::exp(std::log(p[step.action]) - step.logprob_old);
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        const double kl = kl_penalty(p, r);
        res.objective += w * (std::min(unclipped, clipped) - cfg.kl_beta * kl);
        res.mean_kl += kl;
        ++kl_steps;

        std::fill(dz.begin(), dz.end(), 0.0);
        if (unclipped <= clipped) {
          for (std::size_t b = 0; b < A; ++b) dz[b] = adv * ratio * ((b == step.action ? 1.0 : 0.0) - p[b]);
        }
        if (cfg.kl_beta > 0.0) {
          for (std::size_t b = 0; b < A; ++b) {
            if (p[b] <= 0.0) continue;
            dz[b] -= cfg.kl_beta * p[b] * (std::log(p[b]) - std::log(r[b]) - kl);
          }
        }
        for (std::size_t b = 0; b < A; ++b) {
          if (dz[b] == 0.0) continue;
          for (std::size_t f = 0; f < kFeatureDim; ++f) res.gradient[b * kFeatureDim + f] += w * dz[b] * step.features[f];
        }
      }
    }
  }
  if (kl_steps) res.mean_kl /= static_cast<double>(kl_steps);
  return res;
}

PolicyParams update_policy(const PolicyParams& params, std::span<const TrajectoryGroup> batch,
                           const PolicyParams& ref, const GrpoConfig& cfg, ObjectiveResult* info) {
  auto res = grpo_objective_and_gradient(batch, params, ref, cfg);
  for (double g : res.gradient) {
    if (!std::isfinite(g)) fail(Errc::NonfiniteGradient, "gradient has non-finite entries");
  }
  PolicyParams next = params;
  for (std::size_t i = 0; i < next.weights.size(); ++i) next.weights[i] += cfg.learning_rate * res.gradient[i];
  if (info) *info = std::move(res);
  return next;
}

double fit_supervised(PolicyParams& params, std::span<const LabeledExample> examples, const SupervisedConfig& cfg) {
  if (examples.empty()) fail(Errc::EmptyBatch, "no labeled examples");
  const std::size_t A = params.actions();
  for (const auto& ex : examples) {
    if (ex.label >= A) fail(Errc::ShapeMismatch, "label outside the policy's action space");
  }
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  std::vector<double> grad(params.weights.size());
  auto nll = [&] {
    double loss = 0.0;
    for (const auto& ex : examples) loss -= std::log(std::max(params.probs(ex.features)[ex.label], 1e-300));
    return loss * inv_n;
  };
  std::vector<double> m1(grad.size(), 0.0);
  std::vector<double> m2(grad.size(), 0.0);
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& ex : examples) {
      const auto p = params.probs(ex.features);
      for (std::size_t b = 0; b < A; ++b) {
        const double d = (b == ex.label ? 1.0 : 0.0) - p[b];
        for (std::size_t f = 0; f < kFeatureDim; ++f) grad[b * kFeatureDim + f] += d * ex.features[f];
      }
    }
    const double t = static_cast<double>(epoch + 1);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i] * inv_n;
      m1[i] = b1 * m1[i] + (1.0 - b1) * g;
      m2[i] = b2 * m2[i] + (1.0 - b2) * g * g;
      params.weights[i] += cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + 1e-8);
    }
  }
  return nll();
}

namespace {

std::vector<int> greedy_models(const PolicyParams& alloc, const std::vector<FeatureVector>& features) {
  std::vector<int> models;
  models.reserve(features.size());
  for (const auto& x : features) models.push_back(static_cast<int>(argmax(alloc.probs(x))));
  return models;
}

void check_shapes(const PolicyParams& decomp, const PolicyParams& alloc, const TrainingEnv& env) {
  decomp.validate();
  alloc.validate();
  if (decomp.actions() != env.num_candidates()) fail(Errc::ShapeMismatch, "decomposer policy does not match candidates");
  if (alloc.actions() != env.num_models()) fail(Errc::ShapeMismatch, "allocator policy does not match the pool");
}

}  // namespace

PolicyEvaluation evaluate_policies(const TrainingEnv& env, const PolicyParams& decomp, const PolicyParams& alloc,
                                   Decoding decoding, std::uint64_t seed, std::size_t workers) {
  check_shapes(decomp, alloc, env);
  const std::size_t n = env.num_contexts();
  if (n == 0) fail(Errc::EmptyBatch, "environment has no contexts");
  std::vector<EnvOutcome> outcomes(n);
  parallel_for(n, workers, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c, 0x4556ULL));
    const auto dp = decomp.probs(env.decomp_features(c));
    const std::size_t cand = decoding == Decoding::Greedy ? argmax(dp) : sample_index(dp, rng);
    std::vector<int> models;
    for (const auto& x : env.alloc_features(c, cand)) {
      const auto ap = alloc.probs(x);
      models.push_back(static_cast<int>(decoding == Decoding::Greedy ? argmax(ap) : sample_index(ap, rng)));
    }
    outcomes[c] = env.run(c, cand, models, derive_seed(seed, c));
  });
  PolicyEvaluation ev;
  for (const auto& o : outcomes) {
    ev.mean_reward += o.correct ? 1.0 : 0.0;
    ev.mean_cost_cents += o.cost.cents();
  }
  ev.mean_reward /= static_cast<double>(n);
  ev.mean_cost_cents /= static_cast<double>(n);
  return ev;
}

ordered_json to_json(const HistoryEntry& entry) {
  ordered_json row;
  row["round"] = entry.round;
  row["module"] = entry.module == ActionKind::Decomposer ? "decomp" : "alloc";
  row["mean_reward"] = entry.mean_reward;
  row["mean_cost_cents"] = entry.mean_cost_cents;
  row["objective"] = entry.objective;
  row["kl"] = entry.kl;
  return row;
}

CotrainResult cotrain(const PolicyParams& decomp, const PolicyParams& alloc, const TrainingEnv& env,
                      const GrpoConfig& cfg, std::size_t outer_rounds) {
  cfg.validate();
  if (outer_rounds < 1) fail(Errc::InvalidConfig, "need at least one training round");
  check_shapes(decomp, alloc, env);
  const std::size_t n = env.num_contexts();
  if (n == 0) fail(Errc::EmptyBatch, "environment has no contexts");

  CotrainResult result{decomp, alloc, {}, false, {}};
  const std::size_t G = cfg.group_size;

  for (std::size_t round = 1; round <= outer_rounds; ++round) {
    const bool decomp_round = round % 2 == 1;
    PolicyParams& trained = decomp_round ? result.decomp : result.alloc;
    const PolicyParams ref = trained;
    HistoryEntry entry;
    entry.round = round;
    entry.module = decomp_round ? ActionKind::Decomposer : ActionKind::Allocator;
    double reward_sum = 0.0;
    double cost_sum = 0.0;
    std::size_t rollout_count = 0;

    try {
      for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(derive_seed(cfg.seed, round, it, 0x5348ULL));
        for (std::size_t i = n; i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        order.resize(std::min(n, cfg.tasks_per_iteration));

        const PolicyParams old = trained;
        std::vector<TrajectoryGroup> groups(order.size());
        parallel_for(order.size(), cfg.workers, [&](std::size_t g) {
          const std::size_t c = order[g];
          auto& group = groups[g];
          group.context_id = env.context_id(c);
          const auto dx = env.decomp_features(c);
          std::vector<double> rewards;
          for (std::size_t i = 0; i < G; ++i) {
            const auto seed = derive_seed(cfg.seed, round, it, c, i);
            Rng rng(seed);
            Rollout rollout;
            std::size_t cand = 0;
            std::vector<int> models;
            if (decomp_round) {
              const auto p = old.probs(dx);
              cand = sample_index(p, rng);
              rollout.steps.push_back(PolicyStep{dx, cand, std::log(p[cand])});
              models = greedy_models(result.alloc, env.alloc_features(c, cand));
            } else {
              cand = argmax(result.decomp.probs(dx));
              for (const auto& x : env.alloc_features(c, cand)) {
                const auto p = old.probs(x);
                const auto a = sample_index(p, rng);
                rollout.steps.push_back(PolicyStep{x, a, std::log(p[a])});
                models.push_back(static_cast<int>(a));
              }
            }
            const auto out = env.run(c, cand, models, derive_seed(seed, 1));
            rollout.reward = out.correct ? 1.0 : 0.0;
            rollout.cost = out.cost;
            rewards.push_back(rollout.reward);
            group.rollouts.push_back(std::move(rollout));
          }
          group.advantages = group_advantages(rewards);
        });

        for (const auto& g : groups) {
          for (const auto& r : g.rollouts) {
            reward_sum += r.reward;
            cost_sum += r.cost.cents();
            ++rollout_count;
          }
        }
        ObjectiveResult info;
        for (std::size_t s = 0; s < cfg.inner_steps; ++s) trained = update_policy(trained, groups, ref, cfg, &info);
        entry.objective = info.objective;
        entry.kl = info.mean_kl;
      }
    } catch (const Error& e) {
      result.aborted = true;
      result.abort_reason = "round " + std::to_string(round) + ": " + e.what();
      return result;
    }

    entry.mean_reward = rollout_count ? reward_sum / static_cast<double>(rollout_count) : 0.0;
    entry.mean_cost_cents = rollout_count ? cost_sum / static_cast<double>(rollout_count) : 0.0;
    result.history.push_back(entry);
  }
  return result;
}

}  // namespace costroute
