#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "rdlab/noise.hpp"
#include "rdlab/stats.hpp"

using namespace rdlab;

TEST_CASE("philox 4x32-10 known answers") {
  // reference vectors for the 10-round 4x32 configuration
  {
    const auto out = Philox4x32::block({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                       {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                       {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("addressed draws are reproducible and stream-separated") {
  const NoiseStream a(0x12345678abcdefULL, 7);
  const NoiseStream b(0x12345678abcdefULL, 7);
  const NoiseStream c(0x12345678abcdefULL, 8);
  const NoiseStream d(0x12345679abcdefULL, 7);

  for (std::uint64_t step : {0ULL, 1ULL, 999ULL}) {
    for (std::uint64_t cell : {0ULL, 1ULL, 2ULL, 255ULL}) {
      CHECK(a.normal_at(step, cell) == b.normal_at(step, cell));
      CHECK(a.normal_at(step, cell) != c.normal_at(step, cell));
      CHECK(a.normal_at(step, cell) != d.normal_at(step, cell));
      CHECK(a.uniform_at(step, cell) == b.uniform_at(step, cell));
      CHECK(a.uniform_at(step, cell) > 0.0);
      CHECK(a.uniform_at(step, cell) < 1.0);
    }
  }

  // slab fill agrees with pointwise addressing, odd sizes included
  for (int J : {8, 9, 64}) {
    const Field s = a.slab(3, J);
    for (int i = 0; i < J; ++i)
      CHECK(s[i] == a.normal_at(3, static_cast<std::uint64_t>(i)));
  }

  // uniforms never alias normals at the same address
  CHECK(a.uniform_at(5, 10) != a.uniform_at(5, 11));
}

TEST_CASE("slab moments and whiteness") {
  const NoiseStream s(42, 0);
  const int J = 1000;
  const long long steps = 1000;  // one million draws

  MeanVar mv;
  Field slab(J);
  for (long long n = 0; n < steps; ++n) {
    s.fill_slab(static_cast<std::uint64_t>(n), slab);
    for (int i = 0; i < J; ++i) mv.add(slab[i]);
  }
  CHECK(std::abs(mv.mean) <= 4e-3);
  CHECK(std::abs(mv.variance() - 1.0) <= 1e-2);

  // time series at a fixed cell: white
  const auto time_series = [&](long long n) {
    return s.normal_at(static_cast<std::uint64_t>(n), 17);
  };
  const auto w = whiteness_test(time_series, 200000);
  CHECK(w.pass(0.01, 0.02, 0.01));

  // the reuse bug: freezing the step index makes the sequence constant
  const auto frozen = [&](long long) { return s.normal_at(0, 17); };
  const auto wf = whiteness_test(frozen, 1000);
  CHECK(wf.lag1_corr == 1.0);

  // spatial scan within one slab is white too
  const auto spatial = [&](long long i) {
    return s.normal_at(0, static_cast<std::uint64_t>(i));
  };
  const auto ws = whiteness_test(spatial, 200000);
  CHECK(ws.pass(0.01, 0.02, 0.01));
}

TEST_CASE("uniform moments and whiteness") {
  const NoiseStream s(42, 0);
  // standardized uniforms have mean 0 and variance 1
  const double scale = std::sqrt(12.0);
  const auto along_steps = [&](long long n) {
    return (s.uniform_at(static_cast<std::uint64_t>(n), 9) - 0.5) * scale;
  };
  const auto along_cells = [&](long long i) {
    return (s.uniform_at(9, static_cast<std::uint64_t>(i)) - 0.5) * scale;
  };
  CHECK(whiteness_test(along_steps, 200000).pass(0.01, 0.02, 0.01));
  CHECK(whiteness_test(along_cells, 200000).pass(0.01, 0.02, 0.01));

  // coin frequency matches p along both axes
  long long heads = 0;
  const long long flips = 200000;
  for (long long n = 0; n < flips; ++n) {
    if (s.bernoulli_at(static_cast<std::uint64_t>(n), 3, 2.0 / 3.0)) ++heads;
  }
  double freq = static_cast<double>(heads) / flips;
  CHECK(std::abs(freq - 2.0 / 3.0) <= 4.0 * std::sqrt(2.0 / 9.0 / flips));
  heads = 0;
  for (long long i = 0; i < flips; ++i) {
    if (s.bernoulli_at(3, static_cast<std::uint64_t>(i), 2.0 / 3.0)) ++heads;
  }
  freq = static_cast<double>(heads) / flips;
  CHECK(std::abs(freq - 2.0 / 3.0) <= 4.0 * std::sqrt(2.0 / 9.0 / flips));
}

TEST_CASE("mixing weights") {
  CHECK(mixing_f(0.25) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mixing_g(0.25) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(mixing_f(0.0) == 0.0);
  CHECK(mixing_g(0.0) == 1.0);
  CHECK(mixing_f(1.0) == 1.0);
  CHECK(mixing_g(1.0) == 0.0);
  CHECK(mixing_f(-5.0) == 1.0);  // saturates beyond |y| = 1
  CHECK(mixing_g(-5.0) == 0.0);

  // unit-circle identity and 1/2-modulus continuity
  const NoiseStream s(7, 1);
  for (int i = 0; i < 500; ++i) {
    const double y = 4.0 * (s.uniform_at(0, i) - 0.5);
    const double yp = 4.0 * (s.uniform_at(1, i) - 0.5);
    const double f = mixing_f(y), g = mixing_g(y);
    CHECK(std::abs(f * f + g * g - 1.0) <= 1e-12);
    CHECK(std::abs(f - mixing_f(yp)) <= std::sqrt(std::abs(y - yp)) + 1e-12);
    CHECK(std::abs(g - mixing_g(yp)) <= std::sqrt(std::abs(y - yp)) + 1e-12);
  }
}

TEST_CASE("slab blending") {
  const NoiseStream s(11, 0);
  const int J = 64;
  const Field x1 = s.slab(0, J), x2 = s.slab(1, J);

  // gap 0 keeps the first slab bit-exactly; gap >= 1 takes the second
  Field gw = Field::Ones(J), fw = Field::Zero(J);
  Field out = mix_slabs(x1, x2, gw, fw);
  for (int i = 0; i < J; ++i) CHECK(out[i] == x1[i]);
  out = mix_slabs(x1, x2, fw, gw);
  for (int i = 0; i < J; ++i) CHECK(out[i] == x2[i]);

  // weights off the unit circle are rejected
  gw[3] = 0.9;
  CHECK_THROWS_AS(mix_slabs(x1, x2, gw, fw), std::invalid_argument);
  Field bad = Field::Ones(J - 1);
  CHECK_THROWS_AS(mix_slabs(x1, x2, bad, fw), std::invalid_argument);

  // a sqrt(1/2)-blend of independent slabs is again standard white noise
  const double h = std::sqrt(0.5);
  const Field gh = Field::Constant(J, h), fh = Field::Constant(J, h);
  MeanVar mv;
  for (int n = 0; n < 20000; ++n) {
    const Field m = mix_slabs(s.slab(2 * n, J), s.slab(2 * n + 1, J), gh, fh);
    for (int i = 0; i < J; ++i) mv.add(m[i]);
  }
  CHECK(std::abs(mv.mean) <= 4.0 / std::sqrt(static_cast<double>(mv.n)));
  CHECK(std::abs(mv.variance() - 1.0) <= 1e-2);
}
