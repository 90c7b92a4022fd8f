// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "rlpeft/tensor/rng.hpp"

namespace rlpeft::tasks {

using Token = std::uint32_t;
using Sequence = std::vector<Token>;

namespace tok {
inline constexpr Token kPad = 0;
inline constexpr Token kBos = 1;
inline constexpr Token kEos = 2;
inline constexpr Token kAns = 3;
inline constexpr Token kPlus = 4;
inline constexpr Token kMod = 5;
inline constexpr Token kEquals = 6;
inline constexpr Token kSep = 7;
/// Integer n is encoded as token kNumberBase + n.
inline constexpr Token kNumberBase = 8;
}  // namespace tok

inline constexpr std::size_t kReservedTokens = tok::kNumberBase;

inline Token number_token(std::size_t n) { return tok::kNumberBase + static_cast<Token>(n); }

enum class TaskId { kModAdd, kDigitSum, kReverse };

std::string_view task_name(TaskId id);
/// Throws ConfigError on an unknown name.
TaskId parse_task(std::string_view name);

struct TaskInstance {
  Sequence prompt;
  Sequence ground_truth;
  TaskId task_id = TaskId::kModAdd;
  int difficulty = 1;
};

/// Smallest prime >= 6 * difficulty + 1.
std::size_t modadd_modulus(int difficulty);

/// Largest integer value an instance of (task, difficulty) may contain.
std::size_t max_number(TaskId task, int difficulty);
/// Vocabulary size needed to encode every instance of (task, difficulty).
std::size_t vocab_needed(TaskId task, int difficulty);
/// Longest prompt / ground truth for (task, difficulty).
std::size_t max_prompt_length(TaskId task, int difficulty);
std::size_t max_answer_length(TaskId task, int difficulty);

TaskInstance make_modadd(std::size_t a, std::size_t b, std::size_t p);

/// Throws ContractError when difficulty < 1.
TaskInstance gen_instance(TaskId task, int difficulty, Rng& rng);

/// An instance of a related skill with a correct answer, used to pretrain
/// the base policy: ModAdd -> unreduced a + b, DigitSum -> the digit sum of
/// one fewer digit, Reverse -> copying the sequence.
TaskInstance gen_auxiliary(TaskId task, int difficulty, Rng& rng);

/// A well-formed answer drawn uniformly from the task's answer domain,
/// independent of any prompt.
Sequence random_answer(TaskId task, int difficulty, Rng& rng);

/// [kAns, answer..., kEos]
Sequence format_completion(const Sequence& answer);

/// 1 iff the span between the first kAns and the next kEos equals the truth.
int verify(const Sequence& completion, const TaskInstance& instance);

}  // namespace rlpeft::tasks
