#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "activelabel/embedding.hpp"
#include "activelabel/random.hpp"
#include "activelabel/tokenizer.hpp"
#include "activelabel/training.hpp"
#include "activelabel/vocabulary.hpp"

namespace activelabel {
namespace {

using Tokens = std::vector<std::string>;

TokenSequence seq(Tokens tokens) { return TokenSequence{std::move(tokens), ""}; }

TEST(Tokenize, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Great service!").tokens, (Tokens{"great", "service", "!"}));
}

TEST(Tokenize, CollapsesWhitespace) {
  EXPECT_EQ(tokenize("A  B").tokens, (Tokens{"a", "b"}));
  EXPECT_EQ(tokenize("\tA\n\n b \r\n").tokens, (Tokens{"a", "b"}));
}

TEST(Tokenize, TruncatesToMaxLength) {
  std::string text;
  for (int i = 0; i < 200; ++i) text += "w" + std::to_string(i) + " ";
  const auto out = tokenize(text, 128);
  ASSERT_EQ(out.size(), 128u);
  EXPECT_EQ(out.tokens.front(), "w0");
  EXPECT_EQ(out.tokens.back(), "w127");
}

TEST(Tokenize, EmptyOrBlankTextIsAnError) {
  for (const char* text : {"", "   ", "\t\n"}) {
    try {
      tokenize(text);
      FAIL() << "expected EmptyText for '" << text << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyText);
    }
  }
}

TEST(Tokenize, HandlesUnicodePunctuationAndCase) {
  // "Délai trop long… «vraiment»" with non-breaking space.
  const auto out = tokenize("D\xC3\x89LAI\xC2\xA0trop long\xE2\x80\xA6 \xC2\xABvraiment\xC2\xBB");
  EXPECT_EQ(out.tokens, (Tokens{"d\xC3\xA9lai", "trop", "long", "\xE2\x80\xA6", "\xC2\xAB", "vraiment", "\xC2\xBB"}));
}

TEST(Tokenize, RejectsInvalidUtf8) {
  try {
    tokenize("abc \xC3");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidText);
  }
}

TEST(Tokenize, IdempotentOnJoinedTokensProperty) {
  const std::vector<std::string> pieces{"a", "b", "c", "X", "Y", "Z", " ", "  ", ".", ",", "!",
                                         "?", "'", "-", "\xC3\x89", "\xE2\x80\x94"};
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = "x";
    const int len = rng.between(1, 40);
    for (int i = 0; i < len; ++i) text += pieces[rng.below(pieces.size())];
    const auto once = tokenize(text);
    const auto twice = tokenize(join_tokens(once));
    ASSERT_EQ(once.tokens, twice.tokens) << text;
    for (const auto& t : once.tokens) {
      ASSERT_FALSE(t.empty());
      for (char c : t) ASSERT_FALSE(c >= 'A' && c <= 'Z') << t;
    }
  }
}

TEST(Vocabulary, OrdersByFrequencyThenLexicographically) {
  const std::vector<TokenSequence> corpus{seq({"a", "b"}), seq({"a"})};
  const auto v = build_vocabulary(corpus, 1);
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "a", "b"}));
  EXPECT_EQ(v.index("<pad>"), Vocabulary::kPad);
  EXPECT_EQ(v.index("a"), 2);
  EXPECT_EQ(v.index("b"), 3);
}

TEST(Vocabulary, MinCountDropsRareTokens) {
  const std::vector<TokenSequence> corpus{seq({"a", "b"}), seq({"a"})};
  const auto v = build_vocabulary(corpus, 2);
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "a"}));
  EXPECT_EQ(v.index("b"), Vocabulary::kUnk);
}

TEST(Vocabulary, TiesBreakLexicographically) {
  const std::vector<TokenSequence> corpus{seq({"y", "x"})};
  const auto v = build_vocabulary(corpus, 1);
  EXPECT_EQ(v.index("x"), 2);
  EXPECT_EQ(v.index("y"), 3);
}

TEST(Vocabulary, EmptyCorpusIsAnError) {
  try {
    build_vocabulary(std::vector<TokenSequence>{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
}

TEST(Vocabulary, IndicesAreDenseAndDeterministic) {
  std::vector<TokenSequence> corpus;
  Rng rng(3);
  for (int d = 0; d < 50; ++d) {
    Tokens t;
    for (int i = 0; i < 10; ++i) t.push_back("t" + std::to_string(rng.below(30)));
    corpus.push_back(seq(t));
  }
  const auto a = build_vocabulary(corpus, 1);
  const auto b = build_vocabulary(corpus, 1);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.index(a.token(static_cast<TokenId>(i))), static_cast<TokenId>(i));
}

Vocabulary abc_vocab() { return Vocabulary(Tokens{"a", "b", "c"}); }

TEST(LoadPretrained, ReadsHeaderAndRows) {
  std::istringstream in("3 4\na 1 2 3 4\nb 0.5 -0.5 0.25 1e-3\nzzz 9 9 9 9\n");
  const auto table = load_pretrained(in, abc_vocab(), 5);
  EXPECT_EQ(table.dim(), 4);
  EXPECT_EQ(table.rows(), 5);
  EXPECT_TRUE(table.frozen());
  EXPECT_EQ(table.vectors(2, 0), 1.0);
  EXPECT_EQ(table.vectors(2, 3), 4.0);
  EXPECT_EQ(table.vectors(3, 3), 1e-3);
  EXPECT_TRUE(table.vectors.row(Vocabulary::kPad).isZero(0));
}

TEST(LoadPretrained, MissingTokensGetReproducibleSeededRows) {
  const std::string file = "2 4\na 1 2 3 4\nb 1 1 1 1\n";
  std::istringstream in1(file), in2(file), in3(file);
  const auto t1 = load_pretrained(in1, abc_vocab(), 5);
  const auto t2 = load_pretrained(in2, abc_vocab(), 5);
  const auto t3 = load_pretrained(in3, abc_vocab(), 6);
  EXPECT_EQ(t1, t2);
  EXPECT_NE(t1.vectors.row(4), t3.vectors.row(4));
  for (int row : {Vocabulary::kUnk, 4}) {
    EXPECT_FALSE(t1.vectors.row(row).isZero(0));
    EXPECT_LE(t1.vectors.row(row).cwiseAbs().maxCoeff(), kEmbeddingInitRange);
  }
}

TEST(LoadPretrained, ShortLineReportsItsLineNumber) {
  std::istringstream in("3 4\na 1 2 3 4\nb 1 2 3\nc 1 2 3 4\n");
  try {
    load_pretrained(in, abc_vocab());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadPretrained, RejectsBadHeaderAndNonFiniteValues) {
  for (const char* text : {"", "3\n", "x 4\n", "1 0\na\n", "1 2\na 1 nan\n", "1 2\na 1 inf\n", "2 2\na 1 1\n"}) {
    std::istringstream in(text);
    try {
      load_pretrained(in, abc_vocab());
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::FormatError) << text;
      EXPECT_GE(e.line(), 1u);
    }
  }
}

TEST(LoadPretrained, WriterRoundTripsExactly) {
  RowMatrix m(3, 2);
  m << 0.1, -1.0 / 3.0, 2.5e-8, 7.0, -0.05, 1234.5678;
  std::ostringstream out;
  write_embedding_text(out, Tokens{"a", "b", "c"}, m);
  std::istringstream in(out.str());
  const auto table = load_pretrained(in, abc_vocab());
  EXPECT_EQ(table.vectors.bottomRows(3), m);
}

TEST(RandomEmbedding, IsSeededBoundedAndKeepsPadZero) {
  const auto a = random_embedding(10, 8, 1);
  const auto b = random_embedding(10, 8, 1);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.frozen());
  EXPECT_TRUE(a.vectors.row(0).isZero(0));
  EXPECT_LE(a.vectors.cwiseAbs().maxCoeff(), kEmbeddingInitRange);
}

TEST(Lookup, ReturnsTableRowsAndUnkForUnseen) {
  std::istringstream in("3 2\na 1 2\nb 3 4\nc 5 6\n");
  const auto vocab = abc_vocab();
  const auto table = load_pretrained(in, vocab);
  const auto m = lookup(seq({"b", "nope", "a"}), table, vocab);
  ASSERT_EQ(m.rows(), 3);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 0), 3.0);
  EXPECT_EQ(m.row(1), table.vectors.row(Vocabulary::kUnk));
  EXPECT_EQ(m(2, 1), 2.0);
}

TEST(Lookup, ShapeIsTokensByDim) {
  const auto vocab = abc_vocab();
  const auto table = random_embedding(vocab.size(), 16, 2);
  const auto m = lookup(seq({"a", "b", "c", "a", "b"}), table, vocab);
  EXPECT_EQ(m.rows(), 5);
  EXPECT_EQ(m.cols(), 16);
}

TEST(FrozenTable, UnchangedByTraining) {
  const auto vocab = std::make_shared<const Vocabulary>(Tokens{"good", "bad", "meh"});
  std::istringstream in("3 4\ngood 1 0 0 0\nbad 0 1 0 0\nmeh 0 0 1 0\n");
  const auto table = load_pretrained(in, *vocab, 9);
  const auto before = table;
  std::vector<std::pair<TokenSequence, LabelVector>> data{
      {seq({"good", "meh"}), {1, 0}}, {seq({"bad"}), {0, 1}}, {seq({"meh", "bad"}), {0, 1}}};
  Hyperparams hyper;
  hyper.hidden = 4;
  hyper.epochs = 5;
  const auto params = train<double>(data, hyper, table, *vocab);
  EXPECT_FALSE(params.trains_embedding());
  EXPECT_EQ(table, before);
}

}  // namespace
}  // namespace activelabel
