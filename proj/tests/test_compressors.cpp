#include <doctest.h>

#include <cmath>

#include "dcdgd/compressor.hpp"
#include "dcdgd/random.hpp"

using namespace dcdgd;

TEST_CASE("identity keeps the input bit for bit") {
  Vec z{1.0, -2.5, 0.0, 3.25e-7};
  RandomStream rng = RandomStream::derive(1);
  CompressedMessage m = compress(CompressorSpec::identity(), z, rng);
  CHECK(m.scheme == Scheme::Raw);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(m.decoded[i] == z[i]);
  CHECK(*CompressorSpec::identity().snr_floor() ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("sparsifier with p = 1 is exact") {
  Vec z{0.1, -0.2, 0.3};
  RandomStream rng = RandomStream::derive(2);
  CompressedMessage m = compress(CompressorSpec::sparsifier(1.0), z, rng);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(m.decoded[i] == z[i]);
}

TEST_CASE("sparsifier support is exactly {0, z_i/p}") {
  RandomStream rng = RandomStream::derive(3);
  Vec z(40);
  for (auto& v : z) v = rng.next_gaussian();
  const double p = 0.41;
  for (int draw = 0; draw < 200; ++draw) {
    CompressedMessage m = compress(CompressorSpec::sparsifier(p), z, rng);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const bool ok = m.decoded[i] == 0.0 || m.decoded[i] == z[i] / p;
      CHECK(ok);
    }
  }
}

TEST_CASE("ternary with equal magnitudes is exact") {
  const double c = 0.37;
  Vec z{c, c, -c};
  RandomStream rng = RandomStream::derive(4);
  CompressedMessage m = compress(CompressorSpec::ternary(), z, rng);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(m.decoded[i] == z[i]);
  CHECK(ternary_noise_power(z) == 0.0);
}

TEST_CASE("ternary support is exactly {0, +max, -max}") {
  RandomStream rng = RandomStream::derive(5);
  Vec z(25);
  for (auto& v : z) v = rng.next_gaussian();
  const double m_inf = norm_inf(z);
  for (int draw = 0; draw < 200; ++draw) {
    CompressedMessage msg = compress(CompressorSpec::ternary(), z, rng);
    for (double v : msg.decoded) {
      const bool ok = v == 0.0 || std::abs(v) == m_inf;
      CHECK(ok);
    }
  }
}

TEST_CASE("ternary analytic noise power") {
  CHECK(ternary_noise_power(Vec{2.0, 1.0}) == doctest::Approx(1.0));
  CHECK(ternary_noise_power(Vec{0.0, 0.0, 0.0}) == 0.0);
  CHECK(ternary_noise_power(Vec(7, 1.3)) == 0.0);
  CHECK_THROWS_AS(ternary_noise_power(Vec{}), std::invalid_argument);
}

TEST_CASE("ternary Monte-Carlo noise matches the analytic sum") {
  RandomStream rng = RandomStream::derive(6, 0x7e);
  Vec z(20);
  for (auto& v : z) v = rng.next_gaussian();
  const int trials = 20000;
  CompressorStats stats = estimate_stats(CompressorSpec::ternary(), z, trials, rng);
  const double analytic = ternary_noise_power(z);
  const double slack = 4.0 * stats.noise_power_std / std::sqrt(double(trials));
  CHECK(std::abs(stats.mean_noise_power - analytic) <= slack);
}

TEST_CASE("sparsifier Monte-Carlo noise matches (1/p - 1) ||z||^2") {
  Vec z{1.0, 2.0};
  const double p = 0.5;
  RandomStream rng = RandomStream::derive(7, 0x33);
  const int trials = 100000;
  CompressorStats stats = estimate_stats(CompressorSpec::sparsifier(p), z, trials, rng);
  const double analytic = (1.0 / p - 1.0) * norm2_sq(z);  // = 5
  const double slack = 3.0 * stats.noise_power_std / std::sqrt(double(trials));
  CHECK(std::abs(stats.mean_noise_power - analytic) <= slack);
}

TEST_CASE("per-coordinate unbiasedness within four standard errors") {
  for (int d : {20, 50}) {
    RandomStream vec_rng = RandomStream::derive(8, 0xced, d);
    Vec z = vec_rng.gaussian_vector(d);
    for (const CompressorSpec& spec :
         {CompressorSpec::sparsifier(2.0 / 3.0), CompressorSpec::ternary(),
          CompressorSpec::hybrid(2.0)}) {
      const int trials = 20000;
      RandomStream rng = RandomStream::derive(9, 0xab, d, spec.p * 1000);
      Vec sum(d, 0.0), sum_sq(d, 0.0);
      for (int t = 0; t < trials; ++t) {
        CompressedMessage m = compress(spec, z, rng);
        for (int i = 0; i < d; ++i) {
          sum[i] += m.decoded[i];
          sum_sq[i] += m.decoded[i] * m.decoded[i];
        }
      }
      for (int i = 0; i < d; ++i) {
        const double mean = sum[i] / trials;
        const double var = std::max(0.0, sum_sq[i] / trials - mean * mean);
        const double se = std::sqrt(var / trials);
        // deterministic coordinates (se = 0) still accumulate summation
        // rounding, hence the additive floor
        CHECK(std::abs(mean - z[i]) <= 4.0 * se + 1e-12 * (1.0 + std::abs(z[i])));
      }
    }
  }
}

TEST_CASE("estimate_stats on identity reports zero bias and infinite SNR") {
  Vec z{1.0, -1.0, 2.0};
  RandomStream rng = RandomStream::derive(10);
  CompressorStats stats = estimate_stats(CompressorSpec::identity(), z, 10, rng);
  CHECK(stats.bias_norm == 0.0);
  CHECK(std::isinf(stats.empirical_snr));
  CHECK(stats.mean_model_cost_bits == doctest::Approx(96.0));
}

TEST_CASE("sparsifier empirical SNR concentrates near p/(1-p)") {
  RandomStream vec_rng = RandomStream::derive(11, 0x5eed);
  Vec z = vec_rng.gaussian_vector(50);
  RandomStream rng = RandomStream::derive(12);
  CompressorStats stats =
      estimate_stats(CompressorSpec::sparsifier(2.0 / 3.0), z, 10000, rng);
  CHECK(stats.empirical_snr > 1.8);
  CHECK(stats.empirical_snr < 2.2);
}

TEST_CASE("hybrid halves the sparsifier bill at matched SNR") {
  RandomStream vec_rng = RandomStream::derive(13, 0xc0de);
  Vec z = vec_rng.gaussian_vector(50);
  RandomStream rng_a = RandomStream::derive(14);
  RandomStream rng_b = RandomStream::derive(15);
  CompressorStats hybrid = estimate_stats(CompressorSpec::hybrid(1.0), z, 200, rng_a);
  CompressorStats sparsifier =
      estimate_stats(CompressorSpec::sparsifier(0.5), z, 200, rng_b);
  CHECK(hybrid.mean_model_cost_bits <= 0.6 * sparsifier.mean_model_cost_bits);
}

TEST_CASE("compress validates its input") {
  RandomStream rng = RandomStream::derive(16);
  CHECK_THROWS_AS(compress(CompressorSpec::identity(), Vec{}, rng), std::invalid_argument);
  Vec bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(compress(CompressorSpec::identity(), bad, rng), std::invalid_argument);
  CHECK_THROWS_AS(estimate_stats(CompressorSpec::identity(), Vec{1.0}, 1, rng),
                  std::invalid_argument);
}

TEST_CASE("spec text forms parse and print") {
  CHECK(parse_compressor_spec("identity").variant == CompressorSpec::Variant::Identity);
  CHECK(parse_compressor_spec("dgd").variant == CompressorSpec::Variant::Identity);
  CHECK(parse_compressor_spec("ternary").variant == CompressorSpec::Variant::Ternary);

  CompressorSpec s = parse_compressor_spec("sparsifier:p=0.8");
  CHECK(s.variant == CompressorSpec::Variant::Sparsifier);
  CHECK(s.p == doctest::Approx(0.8));
  CHECK(*s.snr_floor() == doctest::Approx(4.0));

  CompressorSpec h = parse_compressor_spec("hybrid:C=2");
  CHECK(h.snr_bound == doctest::Approx(2.0));
  CHECK(h.p == doctest::Approx(2.0 / 3.0));
  CompressorSpec h2 = parse_compressor_spec("hybrid:C=2,p=0.75");
  CHECK(h2.p == doctest::Approx(0.75));

  CHECK(parse_compressor_spec(h2.to_string()).p == doctest::Approx(0.75));
  CHECK(parse_compressor_spec("sparsifier:p=0.8").to_string() == "sparsifier:p=0.8");

  CHECK_THROWS_AS(parse_compressor_spec("sparsifier"), std::invalid_argument);
  CHECK_THROWS_AS(parse_compressor_spec("sparsifier:p=0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_compressor_spec("hybrid:C=-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_compressor_spec("quantizer:b=8"), std::invalid_argument);
  CHECK_THROWS_AS(parse_compressor_spec("identity:p=1"), std::invalid_argument);
  CHECK(!CompressorSpec::ternary().snr_floor().has_value());
}
