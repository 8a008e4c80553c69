#include <doctest.h>

#include <cmath>
#include <random>

#include "sea/error.hpp"
#include "sea/procedures.hpp"
#include "sea/simulator.hpp"
#include "support.hpp"

using namespace sea;
using sea::test::random_delta;
using sea::test::random_vector;

namespace {

const Dims kDims{8, 8, 3};

// prev = u, cur = m*u + sqrt(1-m^2)*v with u, v orthonormal: cos(cur, prev) = m.
std::pair<Delta, Delta> deltas_with_cosine(std::mt19937_64& rng, double m) {
  auto u = random_vector(rng, kDims.size()), v = random_vector(rng, kDims.size());
  double uu = 0, uv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) uu += u[i] * u[i];
  for (std::size_t i = 0; i < u.size(); ++i) uv += u[i] * v[i];
  for (std::size_t i = 0; i < u.size(); ++i) v[i] -= uv / uu * u[i];
  double nu = std::sqrt(uu), nv = 0;
  for (double x : v) nv += x * x;
  nv = std::sqrt(nv);
  std::vector<double> cur(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) cur[i] = m * u[i] / nu + std::sqrt(1 - m * m) * v[i] / nv;
  return {Delta(kDims, cur), Delta(kDims, u)};
}

}  // namespace

TEST_SUITE("procedures") {

TEST_CASE("generic database") {
  ProcedureDB db = ProcedureDB::with_generics();
  CHECK(db.ids() == std::vector<std::string>{"NULL", "LS", "IMG"});
  CHECK(db[1].context_arity() == 2);
  CHECK(db[0].context_arity() == 1);
  CHECK_THROWS_AS(db.add(Procedure::line_search()), InvalidInput);
  Procedure bad = Procedure::null_procedure();
  bad.id = "X";
  bad.noise = NoiseModel::uniform();
  CHECK_THROWS_AS(db.add(bad), InvalidInput);
}

TEST_CASE("NULL emission") {
  Delta zero = Delta::zeros(kDims);
  CHECK(log_emission(Procedure::null_procedure(), zero, nullptr, nullptr) == 0.0);
  std::mt19937_64 rng(1);
  Delta d = random_delta(rng, kDims, 3);
  CHECK(log_emission(Procedure::null_procedure(), d, nullptr, nullptr) == doctest::Approx(log_floor(kDims.size())));
}

TEST_CASE("uniform noise emission has the closed form d*log(1/511)") {
  Procedure p = Procedure::noise_procedure("N1", NoiseModel::uniform());
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    Delta d = random_delta(rng, kDims, 255);
    CHECK(log_emission(p, d, nullptr, nullptr) == doctest::Approx(kDims.size() * std::log(1.0 / 511)));
  }
}

TEST_CASE("noise emission is additive over pixels") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> pmf(kDeltaLevels);
    double total = 0;
    for (double& p : pmf) total += (p = u(rng));
    for (double& p : pmf) p /= total;
    Procedure proc = Procedure::noise_procedure("N", NoiseModel(pmf));
    Delta d = random_delta(rng, kDims, 1 + k % 255);
    double oracle = 0;
    for (std::size_t i = 0; i < d.size(); ++i) oracle += std::log(pmf[static_cast<std::size_t>(d.level_index(i))]);
    double value = log_emission(proc, d, nullptr, nullptr);
    REQUIRE(std::abs(value - std::max(oracle, log_floor(d.size()))) < 1e-9 * std::abs(oracle));
    if (oracle <= log_floor(d.size())) continue;
    // Splitting the pixels into two halves splits the log-likelihood.
    const std::size_t half = kDims.size() / 2;
    double first = 0, second = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      (i < half ? first : second) += std::log(pmf[static_cast<std::size_t>(d.level_index(i))]);
    REQUIRE(std::abs(value - (first + second)) < 1e-9 * std::abs(oracle));
  }
}

TEST_CASE("line search emission") {
  std::mt19937_64 rng(4);
  Delta prev = random_delta(rng, kDims, 20);
  std::vector<double> half(prev.values().begin(), prev.values().end());
  for (double& v : half) v *= 0.5;
  Delta cur(kDims, half);
  CHECK(log_emission(Procedure::line_search(), cur, &prev, nullptr) == doctest::Approx(0.0));
  for (double& v : half) v = -v;
  CHECK(log_emission(Procedure::line_search(), Delta(kDims, half), &prev, nullptr) == doctest::Approx(0.0));
  CHECK(log_emission(Procedure::line_search(), cur, nullptr, nullptr) == log_floor(kDims.size()));
}

TEST_CASE("interpolation toward the adversarial example") {
  std::mt19937_64 rng(5);
  Image adv = sea::test::random_levels(rng, kDims);
  auto values = adv.values();
  for (double& v : values) v *= 0.3;
  CHECK(log_emission(Procedure::interpolation(), Delta(kDims, values), nullptr, &adv) == doctest::Approx(0.0));
}

TEST_CASE("pattern emission is (M-1) d ln 256 and increases with M") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d = static_cast<double>(kDims.size());
  for (int k = 0; k < 1000; ++k) {
    double m1 = u(rng), m2 = u(rng);
    if (m1 > m2) std::swap(m1, m2);
    auto [c1, p1] = deltas_with_cosine(rng, m1);
    auto [c2, p2] = deltas_with_cosine(rng, m2);
    double e1 = log_emission(Procedure::line_search(), c1, &p1, nullptr);
    double e2 = log_emission(Procedure::line_search(), c2, &p2, nullptr);
    REQUIRE(e1 <= e2 + 1e-9);
    REQUIRE(std::abs(e1 - (m1 - 1) * d * std::log(256.0)) < 1e-6 * d);
    REQUIRE(e1 >= log_floor(kDims.size()));
    REQUIRE(e2 <= 0.0);
  }
}

TEST_CASE("spectral pattern with M = 1 scores zero") {
  std::vector<double> v(kDims.size());
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t c = 0; c < 3; ++c) v[(y * 8 + x) * 3 + c] = (y % 2 ? 4.0 : -4.0) / 255.0;
  Delta stripes(kDims, v);
  std::vector<Delta> cluster{stripes};
  PatternModel model = extract_template(cluster, 3.0);
  CHECK(model.mask == binarize(psd2(stripes), 3.0));
  Procedure p = Procedure::pattern_procedure("P1", model.mask);
  CHECK(log_emission(p, stripes, nullptr, nullptr) == doctest::Approx(0.0));
}

TEST_CASE("horizontal stripes give a one-row template") {
  std::vector<double> v(kDims.size());
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t c = 0; c < 3; ++c) v[(y * 8 + x) * 3 + c] = (x % 4 < 2 ? 6.0 : -6.0) / 255.0;
  std::vector<Delta> cluster(5, Delta(kDims, v));
  Mask mask = extract_template(cluster, 3.0).mask;
  REQUIRE(mask.count() > 0);
  for (std::size_t u = 0; u < mask.height; ++u)
    for (std::size_t w = 0; w < mask.width; ++w)
      if (mask.bits[u * mask.width + w]) CHECK(u == 0);
}

TEST_CASE("degenerate template") {
  std::vector<Delta> zeros(3, Delta::zeros(kDims));
  CHECK_THROWS_AS(extract_template(zeros, 3.0), DegenerateTemplate);
  CHECK_THROWS_AS(extract_template(std::vector<Delta>{}, 3.0), InvalidInput);
}

TEST_CASE("KDE on zero deltas concentrates at level 0") {
  std::vector<Delta> zeros(4, Delta::zeros(kDims));
  KdeConfig cfg;
  NoiseModel m = estimate_noise_pmf(zeros, cfg);
  CHECK(m.pmf()[255] >= 1.0 - 510 * cfg.epsilon - 1e-12);
}

TEST_CASE("KDE recovers a uniform pmf over seven levels") {
  std::mt19937_64 rng(7);
  std::vector<Delta> cluster;
  for (int k = 0; k < 60; ++k) cluster.push_back(random_delta(rng, Dims{16, 16, 1}, 3));
  NoiseModel m = estimate_noise_pmf(cluster);
  double tv = 0;
  for (int i = 0; i < kDeltaLevels; ++i) {
    double target = std::abs(i - 255) <= 3 ? 1.0 / 7 : 0.0;
    tv += std::abs(m.pmf()[static_cast<std::size_t>(i)] - target);
  }
  CHECK(tv / 2 < 0.05);
  double total = 0;
  for (double p : m.pmf()) total += p;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("pmfs from two simulated probe batches agree") {
  Dims dims{32, 32, 3};
  std::vector<Delta> a, b;
  for (std::uint64_t seed : {1u, 2u}) {
    SyntheticAttackSpec spec;
    spec.family = AttackFamily::GaussGrad;
    spec.seed = seed;
    LabeledTrace lt = simulate(spec, random_image(dims, 40 + seed));
    for (std::size_t i = 0; i < lt.labels.size(); ++i)
      if (lt.labels[i] == "N2") (seed == 1 ? a : b).push_back(Delta::between(lt.trace.queries[i], lt.trace.queries[i + 1]));
  }
  REQUIRE(a.size() > 100);
  NoiseModel ma = estimate_noise_pmf(a), mb = estimate_noise_pmf(b);
  double tv = 0;
  for (int i = 0; i < kDeltaLevels; ++i) tv += std::abs(ma.pmf()[i] - mb.pmf()[i]);
  CHECK(tv / 2 < 0.1);

  // The fitted model explains fresh probes better than the uniform model.
  Procedure fitted = Procedure::noise_procedure("N", ma), uniform = Procedure::noise_procedure("U", NoiseModel::uniform());
  double gap = 0;
  for (std::size_t i = 0; i < 100; ++i)
    gap += log_emission(fitted, b[i], nullptr, nullptr) - log_emission(uniform, b[i], nullptr, nullptr);
  CHECK(gap / 100 > 0.0);
}

TEST_CASE("simulated square patterns match their template, Gaussian noise does not") {
  Dims dims{32, 32, 3};
  SyntheticAttackSpec spec;
  spec.family = AttackFamily::BlockPattern;
  spec.norm = Norm::Linf;
  spec.seed = 9;
  LabeledTrace lt = simulate(spec, random_image(dims, 9));
  std::vector<Delta> squares;
  for (std::size_t i = 0; i < lt.labels.size(); ++i)
    if (lt.labels[i] == "P3") squares.push_back(Delta::between(lt.trace.queries[i], lt.trace.queries[i + 1]));
  Procedure p = Procedure::pattern_procedure("P", extract_template(squares, 3.0).mask);
  double in = 0;
  for (const Delta& d : squares) in += match_score(p, DeltaFeatures(d, 3.0), nullptr, nullptr);
  CHECK(in / squares.size() > 0.5);

  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 3.0);
  double out = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(dims.size());
    for (double& x : v) x = std::round(g(rng)) / 255.0;
    out += match_score(p, DeltaFeatures(Delta(dims, v), 3.0), nullptr, nullptr);
  }
  CHECK(out / 50 < 0.2);
}

TEST_CASE("procedure database round-trips through JSON") {
  ProcedureDB db = ProcedureDB::with_generics();
  std::mt19937_64 rng(11);
  std::vector<Delta> noise;
  for (int k = 0; k < 3; ++k) noise.push_back(random_delta(rng, kDims, 4));
  db.add(Procedure::noise_procedure("N1", estimate_noise_pmf(noise)));
  Mask mask{8, 8, std::vector<std::uint8_t>(64, 0)};
  mask.bits[3] = mask.bits[17] = mask.bits[63] = 1;
  db.add(Procedure::pattern_procedure("P1", mask));
  db.set_binarize_factor(2.5);
  ProcedureDB back = procedure_db_from_json(to_json(db));
  CHECK(back.ids() == db.ids());
  CHECK(back.binarize_factor() == 2.5);
  CHECK(back[4].pattern->mask == mask);
  for (int i = 0; i < kDeltaLevels; ++i) CHECK(back[3].noise->pmf()[i] == doctest::Approx(db[3].noise->pmf()[i]));
  CHECK_THROWS_AS(mask_from_json(nlohmann::json{{"height", 8}, {"width", 8}, {"bits", "zz"}}), FormatError);
}

}
