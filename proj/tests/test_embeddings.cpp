#include <doctest.h>

#include <algorithm>

#include "pairrank/corpus.hpp"
#include "pairrank/embeddings.hpp"
#include "test_util.hpp"

using namespace pairrank;

TEST_SUITE("embeddings") {

TEST_CASE("load text vectors") {
  testutil::TempDir dir("emb");
  std::string line_a = "alpha", line_b = "beta";
  for (int i = 0; i < 300; ++i) {
    line_a += " " + std::to_string(i * 0.5);
    line_b += " " + std::to_string(-i * 0.25);
  }
  testutil::write_file(dir.file("v.vec"), line_a + "\n" + line_b + "\n");
  const EmbeddingBank bank = EmbeddingBank::load(dir.file("v.vec"), BankRole::GloVe);
  CHECK(bank.size() == 2);
  CHECK(bank.dim() == 300);
  CHECK(bank.lookup("alpha")[3] == 1.5);
  CHECK(bank.lookup("beta")[299] == -74.75);

  std::string short_line = "gamma";
  for (int i = 0; i < 299; ++i) short_line += " 1";
  testutil::write_file(dir.file("bad.vec"), line_a + "\n" + short_line + "\n");
  try {
    EmbeddingBank::load(dir.file("bad.vec"), BankRole::GloVe);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("empty bank") {
  testutil::TempDir dir("emb_empty");
  testutil::write_file(dir.file("e.vec"), "");
  const EmbeddingBank bank = EmbeddingBank::load(dir.file("e.vec"), BankRole::Word2Vec);
  CHECK(bank.size() == 0);
  CHECK(bank.dim() == 0);
  CHECK(bank.lookup("anything").empty());
}

TEST_CASE("lookup and OOV policy") {
  EmbeddingBank glove(BankRole::GloVe, 3);
  glove.add("cat", {1.0, 2.0, 3.0});
  CHECK(glove.lookup("cat") == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(glove.lookup("dog") == std::vector<double>{0.0, 0.0, 0.0});

  EmbeddingBank ft(BankRole::FastText, 3);
  ft.add_subword("<ca", {0.5, -1.0, 2.0});
  CHECK(ft.lookup("cat") == std::vector<double>{0.5, -1.0, 2.0});
  CHECK(ft.lookup("xyz") == std::vector<double>{0.0, 0.0, 0.0});
  ft.add_subword("at>", {1.5, 1.0, 0.0});
  CHECK(ft.lookup("cat") == std::vector<double>{1.0, 0.0, 1.0});

  CHECK_THROWS_AS(glove.add_subword("<ca", {1.0, 1.0, 1.0}), std::logic_error);
  CHECK_THROWS(glove.add("bad", {1.0}));
}

TEST_CASE("character n-grams of <cat>") {
  const std::vector<std::string> expected = {"<ca", "cat", "at>", "<cat", "cat>", "<cat>"};
  CHECK(char_ngrams("cat") == expected);
  const auto greek = char_ngrams("αβ");
  CHECK(greek == std::vector<std::string>{"<αβ", "αβ>", "<αβ>"});
}

TEST_CASE("save and reload is exact") {
  testutil::TempDir dir("emb_rt");
  EmbeddingBank ft(BankRole::FastText, 2);
  ft.add("x", {0.1, 1.0 / 3.0});
  ft.add_subword("<x>", {-2.5e-17, 7.0});
  ft.save(dir.file("f.vec"));
  ft.save_subwords(dir.file("f.sub"));
  EmbeddingBank back = EmbeddingBank::load(dir.file("f.vec"), BankRole::FastText);
  back.load_subwords(dir.file("f.sub"));
  CHECK(back.lookup("x") == ft.lookup("x"));
  CHECK(back.lookup("y") == ft.lookup("y"));
  CHECK(back.oov_vector("x") == std::vector<double>{-2.5e-17, 7.0});
}

TEST_CASE("embedding set") {
  EmbeddingBank w(BankRole::Word2Vec, 2), g(BankRole::GloVe, 2), f(BankRole::FastText, 2);
  w.add("t", {1.0, 0.0});
  g.add("t", {0.0, 1.0});
  f.add("t", {1.0, 1.0});
  f.add_subword("<u>", {3.0, 4.0});
  const EmbeddingSet set(w, g, f);
  const auto t = set.triple_lookup("t");
  CHECK(t[0] == std::vector<double>{1.0, 0.0});
  CHECK(t[1] == std::vector<double>{0.0, 1.0});
  CHECK(t[2] == std::vector<double>{1.0, 1.0});
  const auto u = set.triple_lookup("u");
  CHECK(u[0] == std::vector<double>{0.0, 0.0});
  CHECK(u[1] == std::vector<double>{0.0, 0.0});
  CHECK(u[2] == std::vector<double>{3.0, 4.0});
  const auto oov = set.oov_lookup("t");
  CHECK(oov[0] == std::vector<double>{0.0, 0.0});
  CHECK(oov[2] == std::vector<double>{1.0, 1.0});

  EmbeddingBank small(BankRole::FastText, 1);
  small.add("t", {1.0});
  CHECK_THROWS(EmbeddingSet(w, g, small));
  CHECK_THROWS(EmbeddingSet(g, w, f));
}

}  // TEST_SUITE
