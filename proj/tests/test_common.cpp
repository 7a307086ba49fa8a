// core utilities: pinned rng mapping, deterministic chunked parallelism,
// little-endian float64 block io, angle wrapping, and text formatting.

#include <catch2/catch_amalgamated.hpp>
#include <cstring>
#include <set>
#include <sstream>

#include "reachtrack/common.hpp"

using namespace reachtrack;

// ---- oracles ----------------------------------------------------------------

// reference little-endian encoding of one double, built bit by bit from the
// ieee-754 fields rather than from memcpy, so byte order is asserted, not assumed
static std::array<unsigned char, 8> le_bytes_reference(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);  // host representation of the ieee-754 word
  std::array<unsigned char, 8> out{};
  for (int i = 0; i < 8; ++i) out[std::size_t(i)] = (bits >> (8 * i)) & 0xff;
  return out;
}

// reference chunk boundaries: floor(n*c/chunks), written independently
static std::vector<std::size_t> chunk_bounds_reference(std::size_t n, int chunks) {
  std::vector<std::size_t> b;
  for (int c = 0; c <= chunks; ++c) b.push_back(n * std::size_t(c) / std::size_t(chunks));
  return b;
}

// ---- little-endian io -------------------------------------------------------

TEST_CASE("float64 block io writes little-endian bytes") {
  // hand-checked words: 1.0 = 0x3FF0000000000000 -> bytes 00..00 F0 3F
  std::ostringstream os(std::ios::binary);
  double one = 1.0;
  write_f64_le(os, &one, 1);
  std::string s = os.str();
  REQUIRE(s.size() == 8);
  const unsigned char expect[8] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  for (int i = 0; i < 8; ++i) REQUIRE((unsigned char)s[std::size_t(i)] == expect[i]);

  // arbitrary values against the bit-field reference encoding
  Vec vals = {0.0, -1.0, 3.5, 1e-300, -2.718281828459045, 6.02214076e23};
  std::ostringstream os2(std::ios::binary);
  write_f64_le(os2, vals.data(), vals.size());
  std::string s2 = os2.str();
  REQUIRE(s2.size() == 8 * vals.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    auto ref = le_bytes_reference(vals[k]);
    for (int i = 0; i < 8; ++i)
      REQUIRE((unsigned char)s2[8 * k + std::size_t(i)] == ref[std::size_t(i)]);
  }
}

TEST_CASE("float64 block io round-trips bit-exactly") {
  std::mt19937_64 g(42);
  Vec vals(1000);
  for (auto& v : vals) v = gauss(g) * std::pow(10.0, uniform(g, -20, 20));
  vals[0] = 0.0;
  vals[1] = -0.0;
  std::ostringstream os(std::ios::binary);
  write_f64_le(os, vals.data(), vals.size());
  std::istringstream is(os.str(), std::ios::binary);
  Vec back(vals.size());
  read_f64_le(is, back.data(), back.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    std::uint64_t a, b;
    std::memcpy(&a, &vals[i], 8);
    std::memcpy(&b, &back[i], 8);
    REQUIRE(a == b);
  }
}

TEST_CASE("truncated float64 block is rejected") {
  std::ostringstream os(std::ios::binary);
  double xs[3] = {1.0, 2.0, 3.0};
  write_f64_le(os, xs, 3);
  std::string s = os.str();
  s.resize(20);  // cut mid-value
  std::istringstream is(s, std::ios::binary);
  double back[3];
  REQUIRE_THROWS_AS(read_f64_le(is, back, 3), contract_error);
}

// ---- rng ----------------------------------------------------------------------

TEST_CASE("uniform01 maps raw draws into [0,1) deterministically") {
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    double u = uniform01(a);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(u == double(b() >> 11) * 0x1.0p-53);  // the pinned mapping
  }
}

TEST_CASE("uniform_index stays in range and covers all buckets") {
  std::mt19937_64 g(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t k = uniform_index(g, 7);
    REQUIRE(k < 7);
    seen.insert(k);
  }
  REQUIRE(seen.size() == 7);
}

TEST_CASE("gauss draws have sane moments") {
  std::mt19937_64 g(11);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = gauss(g);
    sum += x;
    sq += x * x;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  REQUIRE(std::fabs(mean) < 0.02);
  REQUIRE(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("derive_seed separates bases and salts") {
  REQUIRE(derive_seed(1, 100) == derive_seed(1, 100));
  REQUIRE(derive_seed(1, 100) != derive_seed(2, 100));
  REQUIRE(derive_seed(1, 100) != derive_seed(1, 101));
  // no short-range collisions across a block of consecutive salts
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4096; ++s) seen.insert(derive_seed(1, s));
  REQUIRE(seen.size() == 4096);
}

// ---- chunked parallelism ------------------------------------------------------

TEST_CASE("parallel_chunks covers every index exactly once") {
  for (std::size_t n : {std::size_t(1), std::size_t(63), std::size_t(64), std::size_t(65),
                        std::size_t(1000)}) {
    std::vector<int> hits(n, 0);
    parallel_chunks(n, [&](int, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    for (std::size_t i = 0; i < n; ++i) REQUIRE(hits[i] == 1);
  }
}

TEST_CASE("parallel_chunks boundaries depend only on n") {
  const std::size_t n = 12345;
  std::vector<std::size_t> ref = chunk_bounds_reference(n, kFixedChunks);
  std::vector<std::size_t> begins(kFixedChunks + 1, 0);
  begins[kFixedChunks] = n;
  parallel_chunks(n, [&](int c, std::size_t b, std::size_t e) {
    begins[std::size_t(c)] = b;
    REQUIRE(e == ref[std::size_t(c) + 1]);
  });
  for (int c = 0; c <= kFixedChunks; ++c) REQUIRE(begins[std::size_t(c)] == ref[std::size_t(c)]);
}

TEST_CASE("chunk-order reductions are identical for any worker count") {
  const std::size_t n = 100000;
  Vec data(n);
  std::mt19937_64 g(5);
  for (auto& v : data) v = gauss(g);

  auto reduce = [&]() {
    std::vector<double> partial(kFixedChunks, 0.0);
    parallel_chunks(n, [&](int c, std::size_t b, std::size_t e) {
      double s = 0;
      for (std::size_t i = b; i < e; ++i) s += data[i] * data[i];
      partial[std::size_t(c)] = s;
    });
    double total = 0;
    for (double p : partial) total += p;  // fixed fold order
    return total;
  };

  int saved = worker_count();
  set_worker_count(1);
  double r1 = reduce();
  set_worker_count(4);
  double r4 = reduce();
  set_worker_count(saved);
  std::uint64_t b1, b4;
  std::memcpy(&b1, &r1, 8);
  std::memcpy(&b4, &r4, 8);
  REQUIRE(b1 == b4);  // bit-identical, not merely close
}

TEST_CASE("zero-length work is a no-op") {
  bool called = false;
  parallel_chunks(0, [&](int, std::size_t, std::size_t) { called = true; });
  REQUIRE_FALSE(called);
}

// ---- angles, formatting, norms -------------------------------------------------

TEST_CASE("wrap_angle lands in [-pi, pi)") {
  REQUIRE(wrap_angle(0.0) == 0.0);
  REQUIRE(wrap_angle(kPi) == Catch::Approx(-kPi));    // half-open upper end
  REQUIRE(wrap_angle(-kPi) == Catch::Approx(-kPi));
  REQUIRE(wrap_angle(3.0 * kPi) == Catch::Approx(-kPi));
  REQUIRE(wrap_angle(2.0 * kPi) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(wrap_angle(kPi + 0.5) == Catch::Approx(-kPi + 0.5));
  std::mt19937_64 g(9);
  for (int i = 0; i < 1000; ++i) {
    double a = uniform(g, -50, 50);
    double w = wrap_angle(a);
    REQUIRE(w >= -kPi);
    REQUIRE(w < kPi);
    // same angle modulo 2*pi
    REQUIRE(std::fabs(std::remainder(a - w, 2.0 * kPi)) < 1e-9);
  }
}

TEST_CASE("fmt_g17 round-trips doubles exactly") {
  std::mt19937_64 g(13);
  for (int i = 0; i < 200; ++i) {
    double v = gauss(g) * std::pow(10.0, uniform(g, -15, 15));
    double back = std::stod(fmt_g17(v));
    REQUIRE(back == v);
  }
  REQUIRE(fmt_g17(0.5) == "0.5");
}

TEST_CASE("norms and distances") {
  Vec a = {3.0, 4.0};
  REQUIRE(norm2(a) == Catch::Approx(5.0));
  Vec b = {0.0, 0.0};
  REQUIRE(dist2(a, b) == Catch::Approx(5.0));
  REQUIRE(norm_inf(a, b) == Catch::Approx(4.0));
}

TEST_CASE("require throws contract_error with the message") {
  REQUIRE_THROWS_AS(require(false, "boom"), contract_error);
  REQUIRE_NOTHROW(require(true, "fine"));
  try {
    require(false, "exact message text");
    FAIL("unreachable");
  } catch (const contract_error& e) {
    REQUIRE(std::string(e.what()) == "exact message text");
  }
}
