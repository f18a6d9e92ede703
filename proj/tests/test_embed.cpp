#include <gtest/gtest.h>

#include "hybrid/embed.hpp"

using namespace hybrid;

TEST(BinaryCode, AllZeroBits) { EXPECT_EQ(binary_code(0, 3), (std::vector<double>{-1, -1, -1})); }

TEST(BinaryCode, MostSignificantBitFirst) { EXPECT_EQ(binary_code(5, 3), (std::vector<double>{1, -1, 1})); }

TEST(BinaryCode, IndexOutOfRange) { EXPECT_THROW(binary_code(8, 3), RangeError); }

TEST(BinaryCode, SignDecodingInvertsEncodingExhaustively) {
  for (int w = 1; w <= 10; ++w) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << w); ++i) ASSERT_EQ(decode_binary(binary_code(i, w)), i);
  }
  const std::vector<double> zero{1.0, 0.0};
  EXPECT_THROW(decode_binary(zero), DecodeError);
}

TEST(PositionCode, ReversedLastPositionIsCodeOfOne) {
  for (std::size_t L : {1u, 7u, 8u, 100u, 512u}) {
    EXPECT_EQ(pos_encode(L, L, true), binary_code(1, position_width(L)));
    EXPECT_EQ(pos_encode(1, L, false), binary_code(1, position_width(L)));
  }
  EXPECT_THROW(pos_encode(0, 8, false), RangeError);
  EXPECT_THROW(pos_encode(9, 8, true), RangeError);
}

TEST(PositionCode, WidthCoversLengthPlusOne) {
  EXPECT_EQ(position_width(1), 1);
  EXPECT_EQ(position_width(7), 3);
  EXPECT_EQ(position_width(8), 4);
  EXPECT_EQ(position_width(100), 7);
  EXPECT_EQ(position_width(512), 10);
}

TEST(PositionCode, DotProductPeaksOnlyOnTheDiagonal) {
  for (std::size_t L = 1; L <= 64; ++L) {
    const int w = position_width(L);
    for (bool rev : {false, true}) {
      for (std::size_t a = 1; a <= L; ++a) {
        const auto pa = pos_encode(a, L, rev);
        for (std::size_t b = 1; b <= L; ++b) {
          const double d = dot(pa, pos_encode(b, L, rev));
          if (a == b) {
            ASSERT_EQ(d, w);
          } else {
            ASSERT_LE(d, w - 2);
          }
        }
      }
    }
  }
}

TEST(Vocabulary, SelectiveCopyIdsMatchNumberValues) {
  const std::vector<int> values{5, 6, 7, 8, 9, 10};
  const Vocabulary v = Vocabulary::selective_copy(values, 26);
  EXPECT_EQ(v.size(), 32u);
  EXPECT_EQ(v.code_width(), 5);
  for (int k : values) {
    ASSERT_TRUE(v.number(k).has_value());
    EXPECT_EQ(*v.number(k), k);
    EXPECT_EQ(v.value(k), k);
  }
  EXPECT_EQ(v.tokens_of(TokenKind::word).size(), 26u);
  EXPECT_EQ(v.max_number(), 10);
  EXPECT_FALSE(v.number(4).has_value());
}

TEST(Vocabulary, NumberIdMustFit) {
  const std::vector<int> values{9};
  EXPECT_THROW(Vocabulary::selective_copy(values, 3), ConstructionError);
}

TEST(Vocabulary, ArdLayout) {
  const Vocabulary v = Vocabulary::ard(5);
  EXPECT_EQ(v.size(), 34u);
  EXPECT_EQ(v.code_width(), 6);
  EXPECT_EQ(v.bit(0), 32);
  EXPECT_EQ(v.bit(1), 33);
  EXPECT_EQ(v.kind(17), TokenKind::word);
  EXPECT_EQ(v.value(17), 17);
  EXPECT_THROW(v.info(34), LookupError);
}

TEST(EmbedToken, FlagBlockFollowsPartition) {
  const std::vector<int> values{2, 3};
  const Vocabulary v = Vocabulary::selective_copy(values, 3);
  const BlockLayout layout = BlockLayout::selective_copy(v.code_width(), position_width(8));
  const Block& code = layout.block("code");
  const Block& flag = layout.block("flag");
  for (Token t = 0; t < static_cast<Token>(v.size()); ++t) {
    const auto col = embed_token(t, v, layout);
    ASSERT_EQ(col.size(), layout.dim());
    const std::vector<double> c(col.begin() + code.offset, col.begin() + code.offset + code.width);
    const std::vector<double> f(col.begin() + flag.offset, col.begin() + flag.offset + flag.width);
    EXPECT_EQ(c, binary_code(t, v.code_width()));
    if (v.is(t, TokenKind::number)) {
      EXPECT_EQ(f, c);
    } else {
      EXPECT_EQ(f, std::vector<double>(flag.width, 0.0));
    }
    for (std::size_t r = flag.offset + flag.width; r < layout.dim(); ++r) EXPECT_EQ(col[r], 0.0);
  }
  EXPECT_THROW(embed_token(99, v, layout), LookupError);
}

TEST(EmbedToken, BitTokensFlaggedUnderArdLayout) {
  const Vocabulary v = Vocabulary::ard(3);
  const BlockLayout layout = BlockLayout::ard(v.code_width(), position_width(16));
  const Block& flag = layout.block("flag");
  const auto col = embed_token(v.bit(1), v, layout);
  EXPECT_EQ(std::vector<double>(col.begin() + flag.offset, col.begin() + flag.offset + flag.width),
            binary_code(static_cast<std::uint64_t>(v.bit(1)), v.code_width()));
  const auto word = embed_token(3, v, layout);
  for (std::size_t r = flag.offset; r < flag.offset + flag.width; ++r) EXPECT_EQ(word[r], 0.0);
}

TEST(BlockLayout, BlocksTileTheColumn) {
  for (const auto& layout : {BlockLayout::selective_copy(5, 7), BlockLayout::ard(6, 10)}) {
    std::size_t next = 0;
    for (const auto& b : layout.blocks()) {
      EXPECT_EQ(b.offset, next);
      next += b.width;
    }
    EXPECT_EQ(next, layout.dim());
  }
  EXPECT_THROW(BlockLayout::selective_copy(5, 7).block("prev"), LookupError);
}

TEST(AssembleContext, SingleWordColumn) {
  const Vocabulary v = Vocabulary::plain(2);
  const BlockLayout layout = BlockLayout::selective_copy(v.code_width(), position_width(1));
  const Sequence seq{1};
  const auto ctx = assemble_context(seq, v, layout, false);
  EXPECT_EQ(ctx.matrix.cols(), 1u);
  const Block& pos = layout.block("pos");
  EXPECT_EQ(ctx.matrix(pos.offset, 0), 1.0);
  EXPECT_EQ(ctx.matrix(layout.block("state").offset, 0), 0.0);
}

TEST(AssembleContext, CodeBlockRoundTripsAndIsColumnLocal) {
  const std::vector<int> values{5, 6, 7, 8, 9, 10};
  const Vocabulary v = Vocabulary::selective_copy(values, 26);
  const BlockLayout layout = BlockLayout::selective_copy(v.code_width(), position_width(40));
  Sequence seq(40);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<Token>((i * 7) % v.size());
  const auto a = assemble_context(seq, v, layout, true);
  const Block& code = layout.block("code");
  const Block& pos = layout.block("pos");
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto col = a.matrix.column(i);
    EXPECT_EQ(decode_code(std::span(col).subspan(code.offset, code.width), v), seq[i]);
    EXPECT_EQ(std::vector<double>(col.begin() + pos.offset, col.end()), pos_encode(i + 1, 40, true));
  }
  Sequence changed = seq;
  changed[17] = 0;
  const auto b = assemble_context(changed, v, layout, true);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i == 17) {
      EXPECT_NE(a.matrix.column(i), b.matrix.column(i));
    } else {
      EXPECT_EQ(a.matrix.column(i), b.matrix.column(i));
    }
  }
}

TEST(DecodeCode, UnusedCodeIsRejected) {
  const Vocabulary v = Vocabulary::plain(5);  // width 3, codes 5..7 unused
  EXPECT_THROW(decode_code(binary_code(6, 3), v), DecodeError);
  EXPECT_EQ(decode_code(binary_code(4, 3), v), 4);
}
