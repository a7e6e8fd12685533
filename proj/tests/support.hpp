#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "costroute/execution.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/sim_env.hpp"

namespace crtest {

inline std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(CR_SOURCE_DIR) / rel; }

inline const costroute::ModelPool& pool9() {
  static const costroute::ModelPool pool = costroute::load_pool_file(source_path("configs/pool9.json"));
  return pool;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("costroute-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct SimSetup {
  std::unique_ptr<costroute::SimWorld> world;
  std::unique_ptr<costroute::SimExecutor> executor;
  std::unique_ptr<costroute::SimDecompositionGenerator> generator;
  std::unique_ptr<costroute::SimTokenProbSource> probs;
  costroute::ExactMatchChecker checker;
  costroute::LastStepIntegrator integrator;
  costroute::GroupedPool grouped;
  std::vector<costroute::TaskRecord> records;

  SimSetup(std::vector<costroute::SimTask> tasks, costroute::SimMode mode = costroute::SimMode::Deterministic,
           std::uint64_t seed = 0, const costroute::ModelPool& pool = pool9()) {
    world = std::make_unique<costroute::SimWorld>(std::move(tasks), pool,
                                                  costroute::SimModelBehavior::for_pool(pool, mode), seed);
    executor = std::make_unique<costroute::SimExecutor>(*world);
    generator = std::make_unique<costroute::SimDecompositionGenerator>(*world);
    probs = std::make_unique<costroute::SimTokenProbSource>(*world);
    grouped = costroute::partition_groups(pool);
    records = world->task_records();
  }

  costroute::ExecutionContext ctx(bool prm = false) const {
    costroute::ExecutionContext c{&world->pool(), executor.get(), &checker, &integrator, {}, world->seed()};
    c.prm.enabled = prm;
    c.prm.strong_model_id = world->pool().max_id();
    c.prm.threshold_model_id = grouped.min_id(costroute::Tier::Large);
    return c;
  }
};

inline costroute::SimTask sim_task(const std::string& id, std::vector<double> difficulties) {
  costroute::SimTask t;
  t.task_id = id;
  t.difficulties = std::move(difficulties);
  t.tokens.assign(t.difficulties.size(), costroute::TokenUsage{200, 100});
  return t;
}

}  // namespace crtest
