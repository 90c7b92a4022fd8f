// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "rlpeft/errors.hpp"
#include "rlpeft/tasks/tasks.hpp"

namespace rlpeft::tasks {
namespace {

TEST(Tasks, ModAddGroundTruth) {
  const TaskInstance inst = make_modadd(3, 4, 5);
  ASSERT_EQ(inst.ground_truth.size(), 1u);
  EXPECT_EQ(inst.ground_truth[0], number_token(2));
  EXPECT_EQ(inst.prompt.front(), tok::kBos);
  EXPECT_EQ(inst.prompt.back(), tok::kEquals);
}

TEST(Tasks, ModAddOracleOverRandomInstances) {
  Rng rng(1);
  for (int d = 1; d <= 5; ++d) {
    const std::size_t p = modadd_modulus(d);
    for (std::size_t k = 2; k * k <= p; ++k) EXPECT_NE(p % k, 0u);
    EXPECT_GE(p, 6u * static_cast<std::size_t>(d) + 1);
    for (int i = 0; i < 50; ++i) {
      const TaskInstance inst = gen_instance(TaskId::kModAdd, d, rng);
      const std::size_t a = inst.prompt[1] - tok::kNumberBase;
      const std::size_t b = inst.prompt[3] - tok::kNumberBase;
      EXPECT_EQ(inst.prompt[5], number_token(p));
      EXPECT_EQ(inst.ground_truth[0], number_token((a + b) % p));
    }
  }
  EXPECT_EQ(modadd_modulus(1), 7u);
}

TEST(Tasks, DigitSumAndReverse) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const TaskInstance ds = gen_instance(TaskId::kDigitSum, 3, rng);
    ASSERT_EQ(ds.prompt.size(), max_prompt_length(TaskId::kDigitSum, 3));
    std::size_t total = 0;
    for (std::size_t k = 1; k + 1 < ds.prompt.size(); ++k) total += ds.prompt[k] - tok::kNumberBase;
    EXPECT_EQ(ds.ground_truth, Sequence{number_token(total)});

    const TaskInstance rv = gen_instance(TaskId::kReverse, 4, rng);
    ASSERT_EQ(rv.ground_truth.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(rv.ground_truth[k], rv.prompt[4 - k]);
  }
  const TaskInstance single = gen_instance(TaskId::kReverse, 1, rng);
  EXPECT_EQ(single.ground_truth, Sequence{single.prompt[1]});
}

TEST(Tasks, SameSeedSameInstance) {
  for (TaskId id : {TaskId::kModAdd, TaskId::kDigitSum, TaskId::kReverse}) {
    Rng a(9), b(9);
    const TaskInstance x = gen_instance(id, 2, a);
    const TaskInstance y = gen_instance(id, 2, b);
    EXPECT_EQ(x.prompt, y.prompt);
    EXPECT_EQ(x.ground_truth, y.ground_truth);
  }
}

TEST(Tasks, VocabAndLengthBoundsHold) {
  Rng rng(3);
  for (TaskId id : {TaskId::kModAdd, TaskId::kDigitSum, TaskId::kReverse}) {
    for (int d = 1; d <= 4; ++d) {
      for (int i = 0; i < 30; ++i) {
        const TaskInstance inst = gen_instance(id, d, rng);
        EXPECT_LE(inst.prompt.size(), max_prompt_length(id, d));
        EXPECT_LE(inst.ground_truth.size(), max_answer_length(id, d));
        for (Token t : inst.prompt) EXPECT_LT(t, vocab_needed(id, d));
        for (Token t : random_answer(id, d, rng)) EXPECT_LT(t, vocab_needed(id, d));
      }
    }
  }
  EXPECT_THROW(gen_instance(TaskId::kModAdd, 0, rng), ContractError);
  EXPECT_THROW(parse_task("Sudoku"), ConfigError);
}

TEST(Verify, ExactMatchOnly) {
  const TaskInstance inst = make_modadd(3, 4, 5);
  const Token two = number_token(2);
  EXPECT_EQ(verify({tok::kAns, two, tok::kEos}, inst), 1);
  EXPECT_EQ(verify({number_token(9), tok::kAns, two, tok::kEos, number_token(1)}, inst), 1);
  EXPECT_EQ(verify({tok::kAns, number_token(3), tok::kEos}, inst), 0);
  EXPECT_EQ(verify({two, tok::kEos}, inst), 0);
  EXPECT_EQ(verify({tok::kAns, two}, inst), 0);
  EXPECT_EQ(verify({tok::kAns, two, two, tok::kEos}, inst), 0);
  EXPECT_EQ(verify({tok::kAns, tok::kEos}, inst), 0);
  EXPECT_EQ(verify({}, inst), 0);
  EXPECT_EQ(verify(format_completion(inst.ground_truth), inst), 1);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(verify({tok::kAns, two, tok::kEos}, inst), 1);
}

}  // namespace
}  // namespace rlpeft::tasks
