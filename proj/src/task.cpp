#include "costroute/task.hpp"

#include "costroute/interfaces.hpp"

namespace costroute {

std::vector<std::string> Decomposition::texts() const {
  std::vector<std::string> out;
  out.reserve(subtasks.size());
  for (const auto& s : subtasks) out.push_back(s.text);
  return out;
}

Decomposition make_decomposition(std::string task_id, const std::vector<std::string>& texts) {
  Decomposition d;
  d.task_id = std::move(task_id);
  for (std::size_t i = 0; i < texts.size(); ++i) d.subtasks.push_back(Subtask{i, texts[i], std::nullopt, std::nullopt});
  return d;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool ExactMatchChecker::accepts(const TaskRecord& task, std::string_view answer) const {
  return trim(answer) == trim(task.ground_truth);
}

std::string LastStepIntegrator::integrate(const TaskRecord&, std::span<const std::string> step_results) const {
  return step_results.empty() ? std::string{} : step_results.back();
}

}  // namespace costroute
