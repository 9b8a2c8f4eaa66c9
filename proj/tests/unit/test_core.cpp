#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "htr/core/errors.hpp"
#include "htr/core/gemm.hpp"
#include "htr/core/hash.hpp"
#include "htr/core/ops.hpp"
#include "htr/core/rng.hpp"
#include "htr/core/tensor.hpp"
#include "htr/core/utf8.hpp"

using namespace htr;

namespace {

TensorD triple_loop(const TensorD& a, const TensorD& b) {
  TensorD c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

double max_abs_diff(const TensorD& a, const TensorD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("tensor shape contract") {
  TensorD t({2, 3, 4});
  CHECK(t.size() == shape_numel(t.shape()));
  CHECK(t.rank() == 3);
  CHECK_THROWS_AS(TensorD({2, 0}), ShapeError);
  CHECK_THROWS_AS(TensorD({2, 2}, std::vector<double>(3)), ShapeError);
  const TensorD r = t.reshaped({6, 4});
  CHECK(r.shape() == Shape{6, 4});
  CHECK(t.shape() == Shape{2, 3, 4});
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
  t.at(1, 2, 3) = 7.0;
  CHECK(t[23] == 7.0);
  CHECK_THROWS_AS(t.at(2, 0, 0), ShapeError);
}

TEST_CASE("matmul examples") {
  const TensorD id({2, 2}, {1, 0, 0, 1});
  const TensorD m({2, 2}, {3, 4, 5, 6});
  CHECK(matmul(id, m) == m);
  CHECK(matmul(TensorD({1, 2}, {1, 2}), TensorD({2, 1}, {3, 4})) == TensorD({1, 1}, {11}));
  CHECK_THROWS_AS(matmul(TensorD({2, 3}), TensorD({2, 3})), ShapeError);
}

TEST_CASE("matmul matches a triple loop") {
  RngStream rng(1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const TensorD a = rng_normal<double>(rng, {5, 7}, 0.0, 1.0);
    const TensorD b = rng_normal<double>(rng, {7, 3}, 0.0, 1.0);
    CHECK(max_abs_diff(matmul(a, b), triple_loop(a, b)) <= 1e-12);
  }
}

TEST_CASE("matmul associativity") {
  RngStream rng(2, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const TensorD a = rng_normal<double>(rng, {4, 4}, 0.0, 1.0);
    const TensorD b = rng_normal<double>(rng, {4, 4}, 0.0, 1.0);
    const TensorD c = rng_normal<double>(rng, {4, 4}, 0.0, 1.0);
    const TensorD l = matmul(matmul(a, b), c), r = matmul(a, matmul(b, c));
    double scale = 1;
    for (auto v : l.data()) scale = std::max(scale, std::abs(v));
    CHECK(max_abs_diff(l, r) <= 1e-10 * scale);
  }
}

TEST_CASE("gemm matches the reference over transposes and strides") {
  RngStream rng(3, 1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.uniform_below(20), n = 1 + rng.uniform_below(20), k = 1 + rng.uniform_below(20);
    const auto ta = rng.bernoulli(0.5) ? Trans::yes : Trans::no;
    const auto tb = rng.bernoulli(0.5) ? Trans::yes : Trans::no;
    const std::size_t ar = ta == Trans::no ? m : k, ac = ta == Trans::no ? k : m;
    const std::size_t br = tb == Trans::no ? k : n, bc = tb == Trans::no ? n : k;
    const std::size_t lda = ac + rng.uniform_below(3), ldb = bc + rng.uniform_below(3), ldc = n + rng.uniform_below(3);
    const TensorD a = rng_normal<double>(rng, {ar * lda}, 0.0, 1.0);
    const TensorD b = rng_normal<double>(rng, {br * ldb}, 0.0, 1.0);
    TensorD c1 = rng_normal<double>(rng, {m * ldc}, 0.0, 1.0);
    TensorD c2 = c1;
    const double alpha = rng.uniform(-2, 2), beta = trial % 3 == 0 ? 0.0 : rng.uniform(-1, 1);
    gemm(ta, tb, m, n, k, alpha, a.ptr(), lda, b.ptr(), ldb, beta, c1.ptr(), ldc);
    reference::gemm(ta, tb, m, n, k, alpha, a.ptr(), lda, b.ptr(), ldb, beta, c2.ptr(), ldc);
    CHECK(max_abs_diff(c1, c2) <= 1e-12 * static_cast<double>(k));
  }
}

TEST_CASE("elementwise examples") {
  CHECK(elementwise(ElementOp::add, TensorD({2}, {1, 2}), TensorD({2}, {3, 4})) == TensorD({2}, {4, 6}));
  CHECK(elementwise(ElementOp::sub, TensorD({2}, {1, 2}), TensorD({2}, {3, 5})) == TensorD({2}, {-2, -3}));
  CHECK(elementwise(ElementOp::mul, TensorD({2}, {1, 2}), TensorD({2}, {3, 5})) == TensorD({2}, {3, 10}));
  CHECK(elementwise(ElementOp::max, TensorD({2}, {1, 6}), TensorD({2}, {3, 5})) == TensorD({2}, {3, 6}));
  CHECK(elementwise(ElementOp::sigmoid, TensorD({1}, {0.0}))[0] == 0.5);
  const double t20 = elementwise(ElementOp::tanh, TensorD({1}, {20.0}))[0];
  // tanh(20) = 1 - 8.5e-18, which rounds to 1 in double
  CHECK(std::abs(t20 - 1.0) <= std::numeric_limits<double>::epsilon());
  CHECK(elementwise(ElementOp::tanh, TensorD({1}, {-800.0}))[0] == -1.0);
  CHECK(elementwise(ElementOp::sigmoid, TensorD({2}, {-800.0, 800.0})) == TensorD({2}, {0.0, 1.0}));
  CHECK_THROWS_AS(elementwise(ElementOp::add, TensorD({2}), TensorD({3})), ShapeError);
  CHECK_THROWS_AS(elementwise(ElementOp::add, TensorD({2})), std::invalid_argument);
}

TEST_CASE("log domain") {
  CHECK_THROWS_AS(elementwise(ElementOp::log, TensorD({2}, {1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(elementwise(ElementOp::log, TensorD({1}, {-1.0})), DomainError);
  const TensorD m = log_masked(TensorD({3}, {1.0, 0.0, -2.0}));
  CHECK(m[0] == 0.0);
  CHECK(m[1] == -std::numeric_limits<double>::infinity());
  CHECK(m[2] == -std::numeric_limits<double>::infinity());
}

TEST_CASE("exp and log round trip") {
  RngStream rng(4, 1);
  const TensorD x = rng_uniform<double>(rng, {10000}, -10.0, 10.0);
  const TensorD y = elementwise(ElementOp::log, elementwise(ElementOp::exp, x));
  CHECK(max_abs_diff(x, y) <= 1e-12);
}

TEST_CASE("rng_normal") {
  RngStream a(5, 3);
  const TensorD c = rng_normal<double>(a, {10}, 2.5, 0.0);
  for (auto v : c.data()) CHECK(v == 2.5);

  RngStream s1(9, 2), s2(9, 2);
  CHECK(rng_normal<double>(s1, {100}, 0.0, 1.0) == rng_normal<double>(s2, {100}, 0.0, 1.0));

  RngStream s(11, 0);
  const TensorD x = rng_normal<double>(s, {100000}, 0.0, 1.0);
  double mean = std::accumulate(x.data().begin(), x.data().end(), 0.0) / x.size();
  double var = 0;
  for (auto v : x.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (x.size() - 1));
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sd - 1.0) < 0.02);
}

TEST_CASE("rng streams are counter based and thread independent") {
  RngStream s(42, 7);
  std::vector<std::uint64_t> serial(64);
  for (auto& v : serial) v = s.next_u64();
  // jump straight to position 40
  RngStream j(42, 7, 40);
  CHECK(j.next_u64() == serial[40]);
  // drawn concurrently from separate threads
  std::vector<std::uint64_t> parallel(64);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      RngStream local(42, 7, t * 16);
      for (std::size_t i = 0; i < 16; ++i) parallel[t * 16 + i] = local.next_u64();
    });
  }
  for (auto& t : threads) t.join();
  CHECK(parallel == serial);
  CHECK(RngStream(42, 8).next_u64() != serial[0]);
  CHECK(s.derive(1).next_u64() == s.derive(1).next_u64());
  CHECK(s.derive(1).next_u64() != s.derive(2).next_u64());
}

TEST_CASE("rng ranges and permutations") {
  RngStream s(1, 2);
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(s.uniform_below(7) < 7);
  }
  const auto p = rng_permutation(s, 50);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 50);
  CHECK(*seen.rbegin() == 49);
  const TensorF u = rng_uniform<float>(s, {1000}, -1.f, 1.f);
  for (auto v : u.data()) CHECK((v >= -1.f && v < 1.f));
}

TEST_CASE("fnv1a and utf8") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  const std::string s = "a\xd8\xa8\xe2\x82\xac\xf0\x9f\x98\x80";
  const auto cps = utf8::decode(s);
  CHECK(cps == std::u32string{U'a', U'ب', U'€', U'\U0001F600'});
  CHECK(utf8::encode(cps) == s);
  CHECK_THROWS_AS(utf8::decode("\xc3"), DataError);
  CHECK_THROWS_AS(utf8::decode("\xc0\x80"), DataError);
  CHECK_THROWS_AS(utf8::decode("\xff"), DataError);
}

}
