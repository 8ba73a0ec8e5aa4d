#include "doctest.h"

#include <cstring>
#include <fstream>

#include "rstcoref/encoder.hpp"
#include "support.hpp"

using namespace rstcoref;

namespace {

// Little-endian writer used to build stores byte by byte.
struct Bytes {
  std::string data;
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) data.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    data += s;
  }
  void save(const std::filesystem::path& p) const { std::ofstream(p, std::ios::binary) << data; }
};

// "a b" with paragraph 0: [CLS] a a' b [SEP] at d_lm 2.
Bytes two_token_store() {
  Bytes b;
  b.data = "CHDE";
  b.u32(1);
  b.u32(2);
  b.str("doc");
  b.u32(1);
  b.u32(5);
  for (int a : {-1, 0, 0, 1, -1}) b.i32(a);
  for (float v : {9.f, 9.f, 1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 9.f, 9.f}) b.f32(v);
  return b;
}

}  // namespace

TEST_CASE("hand-written store bytes load") {
  testing::TempDir dir("store");
  two_token_store().save(dir.path / "s.chde");
  const EmbeddingStore store = read_store(dir.path / "s.chde");
  CHECK(store.d_lm() == 2);
  const StoreEntry* e = store.find("doc");
  REQUIRE(e != nullptr);
  REQUIRE(e->paragraphs.size() == 1);
  CHECK(e->paragraphs[0].alignment == std::vector<std::int32_t>{-1, 0, 0, 1, -1});
  CHECK(e->paragraphs[0].vectors(3, 1) == 6.f);

  const Document doc = make_document("doc", "a b", {}, nullptr, nullptr);
  const FloatMatrix avg = average_subtokens(*e, doc, 2);
  CHECK(avg(0, 0) == 2.f);
  CHECK(avg(0, 1) == 3.f);
  CHECK(avg(1, 0) == 5.f);
}

TEST_CASE("write then read reproduces the bytes") {
  testing::TempDir dir("store");
  two_token_store().save(dir.path / "a.chde");
  write_store(read_store(dir.path / "a.chde"), dir.path / "b.chde");
  std::ifstream in(dir.path / "b.chde", std::ios::binary);
  const std::string back((std::istreambuf_iterator<char>(in)), {});
  CHECK(back == two_token_store().data);
}

TEST_CASE("malformed stores are rejected") {
  testing::TempDir dir("store");
  SUBCASE("truncated") {
    Bytes b = two_token_store();
    b.data.resize(b.data.size() - 3);
    b.save(dir.path / "s.chde");
    CHECK_THROWS_AS(read_store(dir.path / "s.chde"), StoreFormatError);
  }
  SUBCASE("bad magic") {
    Bytes b = two_token_store();
    b.data[0] = 'X';
    b.save(dir.path / "s.chde");
    CHECK_THROWS_AS(read_store(dir.path / "s.chde"), StoreFormatError);
  }
  SUBCASE("future version") {
    Bytes b = two_token_store();
    b.data[4] = 2;
    b.save(dir.path / "s.chde");
    CHECK_THROWS_AS(read_store(dir.path / "s.chde"), StoreFormatError);
  }
}

TEST_CASE("check_store reports coverage problems") {
  testing::TempDir dir("store");
  two_token_store().save(dir.path / "s.chde");
  const EmbeddingStore store = read_store(dir.path / "s.chde");
  const std::vector<Document> good{make_document("doc", "a b", {}, nullptr, nullptr)};
  CHECK(check_store(store, &good).ok());
  CHECK(check_store(store, nullptr).documents == 1);

  const std::vector<Document> longer{make_document("doc", "a b c", {}, nullptr, nullptr)};
  CHECK_FALSE(check_store(store, &longer).ok());
  const std::vector<Document> missing{make_document("other", "a b", {}, nullptr, nullptr)};
  CHECK_FALSE(check_store(store, &missing).ok());
  const std::vector<Document> two_paragraphs{make_document("doc", "a\nb", {}, nullptr, nullptr)};
  CHECK_FALSE(check_store(store, &two_paragraphs).ok());
}

TEST_CASE("synthetic embeddings are unit vectors keyed by token") {
  const Document doc = make_document("d", "Ka ka lo", {}, nullptr, nullptr);
  const StoreEntry e = synthetic_embeddings(doc, 16, 3);
  const FloatMatrix avg = average_subtokens(e, doc, 16);
  CHECK(avg.row(0).norm() == doctest::Approx(1.0));
  CHECK(avg.row(0).isApprox(avg.row(1)));
  CHECK_FALSE(avg.row(0).isApprox(avg.row(2)));
  EmbeddingStore store(16);
  store.add(e);
  const std::vector<Document> docs{doc};
  CHECK(check_store(store, &docs).ok());
}

TEST_CASE("compressor and span attention gradients") {
  std::mt19937_64 rng(2);
  EncoderParams enc = init_encoder(3, 4, rng);
  const Document doc = make_document("d", "a b c\nd e", {}, nullptr, nullptr);
  ad::Parameter tokens("tokens", testing::random_matrix(5, 3, rng));
  const std::vector<MentionSpan> spans{{0, 0}, {0, 2}, {1, 2}, {3, 4}, {4, 4}};
  std::vector<ad::Parameter*> ps = enc.all();
  ps.push_back(&tokens);
  const ad::Matrix w = testing::random_matrix(5, 12, rng);
  const double err = testing::gradient_check(ps, [&](ad::Tape& t) {
    const EncoderVars v = bind_encoder(t, enc, true);
    const ad::Var x = compress(v, t.parameter(tokens), doc.paragraphs);
    return ad::sum(ad::mul_const(span_representations(v, x, spans), w));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("paragraphs are encoded independently") {
  std::mt19937_64 rng(4);
  const EncoderParams enc = init_encoder(3, 4, rng);
  const Document two = make_document("d", "a b\nc", {}, nullptr, nullptr);
  const Document first = make_document("d", "a b", {}, nullptr, nullptr);
  const ad::Matrix x = testing::random_matrix(3, 3, rng);
  ad::Tape t;
  const EncoderVars v = bind_encoder(t, enc);
  const ad::Matrix all = compress(v, t.constant(x), two.paragraphs).value();
  const ad::Matrix part = compress(v, t.constant(x.topRows(2)), first.paragraphs).value();
  CHECK(all.rows() == 3);
  CHECK(all.cols() == 4);
  CHECK(all.topRows(2).isApprox(part));
  CHECK_THROWS_AS(init_encoder(3, 5, rng), ConfigError);
}
