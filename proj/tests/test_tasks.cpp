#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hybrid/tasks.hpp"

using namespace hybrid;

namespace {

// Independent selective-copy target: walk back from the end to the last number.
Token naive_selective_copy(const Sequence& x, const Vocabulary& v) {
  for (std::size_t j = x.size(); j-- > 0;) {
    if (v.is(x[j], TokenKind::number)) return x[x.size() - static_cast<std::size_t>(v.value(x[j]))];
  }
  return -1;
}

DistributionSpec sc(Variant v) {
  auto spec = DistributionSpec::defaults(TaskKind::selective_copy);
  spec.variant = v;
  return spec;
}

}  // namespace

TEST(SelectiveCopyOracle, WorkedExample) {
  const std::vector<int> values{1, 2, 3};
  const Vocabulary v = Vocabulary::selective_copy(values, 4);
  // ids 0, 4, 5, 6 are words; the last number #3 sits at the end
  const Sequence x{4, 5, 0, 2, 6, 5, 3};
  EXPECT_EQ(oracle_selective_copy(x, v), 6);
  const Sequence y{4, 3, 0, 1, 5};
  EXPECT_EQ(oracle_selective_copy(y, v), 5);
  // #1 at the end points at itself
  EXPECT_EQ(oracle_selective_copy(Sequence{3, 0, 4, 1}, v), 1);
}

TEST(SelectiveCopyOracle, Errors) {
  const std::vector<int> values{1, 9};
  const Vocabulary v = Vocabulary::selective_copy(values, 12);
  EXPECT_THROW(oracle_selective_copy(Sequence{0, 2, 3}, v), UndefinedInputError);
  EXPECT_THROW(oracle_selective_copy(Sequence{0, 2, 9}, v), RangeError);
}

TEST(SelectiveCopyOracle, AgreesWithNaiveScan) {
  for (Variant var : {Variant::uniform, Variant::ds, Variant::dt, Variant::mixture}) {
    const auto spec = sc(var);
    const Vocabulary v = spec.vocabulary();
    for (const auto& inst : generate_dataset(spec, 500, 11)) {
      ASSERT_EQ(inst.target, naive_selective_copy(inst.tokens, v));
    }
  }
}

TEST(SelectiveCopySampler, ShortcutFormEndsWithNumber) {
  const auto spec = sc(Variant::ds);
  const Vocabulary v = spec.vocabulary();
  for (const auto& inst : generate_dataset(spec, 2000, 12)) {
    ASSERT_EQ(inst.tokens.size(), 100u);
    ASSERT_TRUE(v.is(inst.tokens.back(), TokenKind::number));
    ASSERT_GE(v.value(inst.tokens.back()), spec.ds_number_min);
  }
}

TEST(SelectiveCopySampler, TailFormKeepsNumbersInFirstHalf) {
  const auto spec = sc(Variant::dt);
  const Vocabulary v = spec.vocabulary();
  for (const auto& inst : generate_dataset(spec, 2000, 13)) {
    for (std::size_t i = 49; i < 100; ++i) ASSERT_FALSE(v.is(inst.tokens[i], TokenKind::number)) << i;
    ASSERT_TRUE(std::any_of(inst.tokens.begin(), inst.tokens.begin() + 49,
                            [&](Token t) { return v.is(t, TokenKind::number); }));
  }
}

TEST(SelectiveCopySampler, MixtureIsHalfAndHalf) {
  const auto data = generate_dataset(sc(Variant::mixture), 10000, 14);
  const auto shortcut = std::count_if(data.begin(), data.end(), [](const TaskInstance& i) {
    return i.component == Variant::ds;
  });
  EXPECT_NEAR(static_cast<double>(shortcut) / 10000.0, 0.5, 0.02);
  for (const auto& i : data) ASSERT_EQ(i.dist, Variant::mixture);
}

TEST(SelectiveCopySampler, UniformAlwaysHasANumber) {
  const auto spec = sc(Variant::uniform);
  const Vocabulary v = spec.vocabulary();
  for (const auto& inst : generate_dataset(spec, 1000, 15)) {
    ASSERT_TRUE(std::any_of(inst.tokens.begin(), inst.tokens.end(),
                            [&](Token t) { return v.is(t, TokenKind::number); }));
  }
}

TEST(ArdOracle, WorkedExample) {
  const Vocabulary v = Vocabulary::ard(3);
  const Sequence x{2, 7, 1, 4, v.bit(0), v.bit(0), v.bit(1)};
  EXPECT_EQ(oracle_ard(x, v, 3), 4);
  // key 5 is absent
  const Sequence y{2, 7, 1, 4, v.bit(1), v.bit(0), v.bit(1)};
  EXPECT_THROW(oracle_ard(y, v, 3), UndefinedInputError);
}

TEST(ArdOracle, KeyAtLastWordMapsToFirstBit) {
  const Vocabulary v = Vocabulary::ard(2);
  const Sequence x{0, 3, 2, v.bit(1), v.bit(0)};
  EXPECT_EQ(oracle_ard(x, v, 2), v.bit(1));
}

TEST(ArdSampler, HardFormsAlternateHalves) {
  for (Variant var : {Variant::ds, Variant::dt}) {
    auto spec = DistributionSpec::defaults(TaskKind::ard);
    spec.variant = var;
    spec.length = 511;
    const Vocabulary v = spec.vocabulary();
    for (const auto& inst : generate_dataset(spec, 200, 16)) {
      const auto& x = inst.tokens;
      const std::size_t start = var == Variant::dt ? 5 : 0;
      for (std::size_t i = 0; i < 5; ++i) {
        ASSERT_TRUE(v.is(x[var == Variant::dt ? i : x.size() - 5 + i], TokenKind::bit));
      }
      for (std::size_t i = 0; i < x.size() - 5; ++i) {
        const Token t = x[start + i];
        ASSERT_TRUE(v.is(t, TokenKind::word));
        if (i % 2 == 0) ASSERT_LT(t, 16);
        else ASSERT_GE(t, 16);
      }
      if (var == Variant::ds) ASSERT_GE(inst.target, 16);
    }
  }
}

TEST(ArdSampler, HardFormsNeedEvenWordCount) {
  auto spec = DistributionSpec::defaults(TaskKind::ard);
  spec.variant = Variant::ds;
  spec.length = 100;
  EXPECT_THROW(spec.validate(), SpecError);
}

TEST(MkarOracle, Examples) {
  // trailing (1, 2) last occurred at index 3, followed by 0
  EXPECT_EQ(oracle_mkar(Sequence{1, 2, 5, 1, 2, 0, 1, 2}, 2), 0);
  EXPECT_EQ(oracle_mkar(Sequence{3, 3, 3}, 1), 3);
  EXPECT_THROW(oracle_mkar(Sequence{1, 2, 3, 4}, 2), UndefinedInputError);
}

TEST(NeedleOracle, Examples) {
  const Vocabulary v = Vocabulary::needle(5);
  const Token m = 5, q = 6;
  EXPECT_EQ(oracle_nh(Sequence{0, m, 3, 1, q}, v), 3);
  EXPECT_THROW(oracle_nh(Sequence{0, 2, 3, 1, q}, v), SpecError);
  EXPECT_THROW(oracle_nh(Sequence{m, 2, m, 1, q}, v), SpecError);
}

TEST(Samplers, OtherTasksMatchTheirOracles) {
  for (TaskKind task : {TaskKind::mkar, TaskKind::nh}) {
    const auto spec = DistributionSpec::defaults(task);
    const TaskSampler s(spec);
    for (const auto& inst : generate_dataset(spec, 300, 17)) {
      ASSERT_EQ(inst.tokens.size(), spec.length);
      ASSERT_EQ(inst.target, s.oracle(inst.tokens));
    }
  }
  auto bad = DistributionSpec::defaults(TaskKind::nh);
  bad.variant = Variant::ds;
  EXPECT_THROW(bad.validate(), SpecError);
}

TEST(Datasets, DeterministicAcrossThreadCounts) {
  const auto spec = sc(Variant::mixture);
  const auto a = generate_dataset(spec, 300, 99, 1);
  const auto b = generate_dataset(spec, 300, 99, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, generate_dataset(spec, 300, 100, 1));
  // prefix stability: the first 100 instances do not depend on n
  const auto c = generate_dataset(spec, 100, 99, 1);
  EXPECT_TRUE(std::equal(c.begin(), c.end(), a.begin()));
}

TEST(Datasets, JsonlRoundTrip) {
  auto spec = DistributionSpec::defaults(TaskKind::ard);
  spec.length = 64;
  const auto data = generate_dataset(spec, 50, 3);
  std::stringstream ss;
  write_jsonl(ss, data);
  EXPECT_EQ(read_jsonl(ss), data);
  EXPECT_EQ(distribution_from_json(to_json(spec)), spec);
}

TEST(Variants, Names) {
  EXPECT_EQ(variant_from_string("D_S"), Variant::ds);
  EXPECT_EQ(variant_from_string(to_string(Variant::mixture)), Variant::mixture);
  EXPECT_THROW(variant_from_string("nope"), SpecError);
}
