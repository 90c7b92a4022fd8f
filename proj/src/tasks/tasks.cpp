// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/tasks/tasks.hpp"

#include <algorithm>
#include <string>

#include "rlpeft/errors.hpp"

namespace rlpeft::tasks {
namespace {

bool is_prime(std::size_t n) {
  if (n < 2) return false;
  for (std::size_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

void require_difficulty(int difficulty) {
  if (difficulty < 1) throw ContractError("difficulty must be >= 1, got " + std::to_string(difficulty));
}

std::size_t digit_count(int difficulty) { return static_cast<std::size_t>(difficulty) + 1; }

}  // namespace

std::string_view task_name(TaskId id) {
  switch (id) {
    case TaskId::kModAdd: return "ModAdd";
    case TaskId::kDigitSum: return "DigitSum";
    case TaskId::kReverse: return "Reverse";
  }
  return "?";
}

TaskId parse_task(std::string_view name) {
  for (TaskId id : {TaskId::kModAdd, TaskId::kDigitSum, TaskId::kReverse})
    if (task_name(id) == name) return id;
  throw ConfigError("task.family: unknown task '" + std::string(name) + "'");
}

std::size_t modadd_modulus(int difficulty) {
  require_difficulty(difficulty);
  std::size_t p = 6 * static_cast<std::size_t>(difficulty) + 1;
  while (!is_prime(p)) ++p;
  return p;
}

std::size_t max_number(TaskId task, int difficulty) {
  require_difficulty(difficulty);
  switch (task) {
    case TaskId::kModAdd: return modadd_modulus(difficulty);
    case TaskId::kDigitSum: return 9 * digit_count(difficulty);
    case TaskId::kReverse: return 9;
  }
  return 0;
}

std::size_t vocab_needed(TaskId task, int difficulty) {
  return kReservedTokens + max_number(task, difficulty) + 1;
}

std::size_t max_prompt_length(TaskId task, int difficulty) {
  require_difficulty(difficulty);
  switch (task) {
    case TaskId::kModAdd: return 7;
    case TaskId::kDigitSum: return digit_count(difficulty) + 2;
    case TaskId::kReverse: return static_cast<std::size_t>(difficulty) + 2;
  }
  return 0;
}

std::size_t max_answer_length(TaskId task, int difficulty) {
  require_difficulty(difficulty);
  return task == TaskId::kReverse ? static_cast<std::size_t>(difficulty) : 1;
}

TaskInstance make_modadd(std::size_t a, std::size_t b, std::size_t p) {
  if (p == 0) throw ContractError("make_modadd: modulus must be positive");
  TaskInstance inst;
  inst.task_id = TaskId::kModAdd;
  inst.prompt = {tok::kBos,       number_token(a), tok::kPlus,  number_token(b),
                 tok::kMod,       number_token(p), tok::kEquals};
  inst.ground_truth = {number_token((a + b) % p)};
  return inst;
}

TaskInstance gen_instance(TaskId task, int difficulty, Rng& rng) {
  require_difficulty(difficulty);
  TaskInstance inst;
  switch (task) {
    case TaskId::kModAdd: {
      const std::size_t p = modadd_modulus(difficulty);
      const std::size_t a = rng.below(p);
      const std::size_t b = rng.below(p);
      inst = make_modadd(a, b, p);
      break;
    }
    case TaskId::kDigitSum: {
      inst.prompt = {tok::kBos};
      std::size_t total = 0;
      for (std::size_t i = 0; i < digit_count(difficulty); ++i) {
        const std::size_t d = rng.below(10);
        total += d;
        inst.prompt.push_back(number_token(d));
      }
      inst.prompt.push_back(tok::kEquals);
      inst.ground_truth = {number_token(total)};
      break;
    }
    case TaskId::kReverse: {
      inst.prompt = {tok::kBos};
      for (int i = 0; i < difficulty; ++i) inst.prompt.push_back(number_token(rng.below(10)));
      inst.prompt.push_back(tok::kSep);
      inst.ground_truth.assign(inst.prompt.rbegin() + 1, inst.prompt.rend() - 1);
      break;
    }
  }
  inst.task_id = task;
  inst.difficulty = difficulty;
  return inst;
}

TaskInstance gen_auxiliary(TaskId task, int difficulty, Rng& rng) {
  require_difficulty(difficulty);
  TaskInstance inst;
  switch (task) {
    case TaskId::kModAdd: {
      const std::size_t p = modadd_modulus(difficulty);
      const std::size_t a = rng.below(p);
      const std::size_t b = rng.below(p);
      inst.prompt = {tok::kBos, number_token(a), tok::kPlus, number_token(b), tok::kEquals};
      inst.ground_truth = {number_token(a + b)};
      break;
    }
    case TaskId::kDigitSum: {
      inst.prompt = {tok::kBos};
      std::size_t total = 0;
      for (int i = 0; i < difficulty; ++i) {
        const std::size_t d = rng.below(10);
        total += d;
        inst.prompt.push_back(number_token(d));
      }
      inst.prompt.push_back(tok::kEquals);
      inst.ground_truth = {number_token(total)};
      break;
    }
    case TaskId::kReverse: {
      inst.prompt = {tok::kBos};
      for (int i = 0; i < difficulty; ++i) inst.prompt.push_back(number_token(rng.below(10)));
      inst.prompt.push_back(tok::kEquals);
      inst.ground_truth.assign(inst.prompt.begin() + 1, inst.prompt.end() - 1);
      break;
    }
  }
  inst.task_id = task;
  inst.difficulty = difficulty;
  return inst;
}

Sequence random_answer(TaskId task, int difficulty, Rng& rng) {
  switch (task) {
    case TaskId::kModAdd: return {number_token(rng.below(modadd_modulus(difficulty)))};
    case TaskId::kDigitSum: return {number_token(rng.below(max_number(task, difficulty) + 1))};
    case TaskId::kReverse: {
      Sequence s;
      for (int i = 0; i < difficulty; ++i) s.push_back(number_token(rng.below(10)));
      return s;
    }
  }
  return {};
}

Sequence format_completion(const Sequence& answer) {
  Sequence out{tok::kAns};
  out.insert(out.end(), answer.begin(), answer.end());
  out.push_back(tok::kEos);
  return out;
}

int verify(const Sequence& completion, const TaskInstance& instance) {
  const auto open = std::find(completion.begin(), completion.end(), tok::kAns);
  if (open == completion.end()) return 0;
  const auto close = std::find(open + 1, completion.end(), tok::kEos);
  if (close == completion.end()) return 0;
  return std::equal(open + 1, close, instance.ground_truth.begin(), instance.ground_truth.end()) ? 1 : 0;
}

}  // namespace rlpeft::tasks
