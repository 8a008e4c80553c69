#include <doctest.h>

#include <algorithm>
#include <random>

#include "sea/error.hpp"
#include "sea/extraction.hpp"
#include "sea/simulator.hpp"
#include "support.hpp"

using namespace sea;
using namespace sea::test;

namespace {

const Dims kDims{16, 16, 3};

std::vector<std::size_t> indices_of(const Trace& t) {
  std::vector<std::size_t> out;
  for (const auto& i : t.log_indices)
    if (i) out.push_back(*i);
  return out;
}

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("exact copies of adv among noise images") {
  std::mt19937_64 rng(1);
  Image adv = random_image(kDims, 3);
  QueryLog log;
  std::vector<std::size_t> truth;
  for (int i = 0; i < 10; ++i) {
    if (i % 2 == 0) {
      truth.push_back(static_cast<std::size_t>(i));
      log.append(i, adv);
    } else {
      log.append(i, random_levels(rng, kDims));
    }
  }
  ExtractionResult r = extract_trace(log, adv, 0.5);
  CHECK(r.adv_in_log);
  CHECK(r.trace.size() == 5);
  CHECK(r.trace.log_indices.back() == std::optional<std::size_t>(8));
  PrecisionRecall pr = score_extraction(r.trace.log_indices, truth);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
}

TEST_CASE("entries after the reported example are dropped") {
  Image adv = random_image(kDims, 4);
  QueryLog log;
  log.append(0, adv);
  log.append(1, adv);
  log.append(2, adv);
  std::vector<std::uint8_t> near(adv.levels().begin(), adv.levels().end());
  near[0] = static_cast<std::uint8_t>(near[0] ^ 1);
  log.append(3, Image(kDims, near));
  ExtractionResult r = extract_trace(log, adv, 0.5);
  CHECK(indices_of(r.trace) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("empty log and adv missing from the log") {
  Image adv = random_image(kDims, 5);
  ExtractionResult r = extract_trace(QueryLog{}, adv, 0.5);
  CHECK(r.trace.size() == 1);
  CHECK(!r.adv_in_log);
  CHECK(!r.trace.log_indices.back());
  CHECK(r.trace.adv() == adv);
}

TEST_CASE("invalid inputs") {
  QueryLog log;
  log.append(0, random_image(kDims, 1));
  CHECK_THROWS_AS(extract_trace(log, random_image(Dims{8, 8, 3}, 1), 0.5), InvalidInput);
  CHECK_THROWS_AS(extract_trace(log, random_image(kDims, 1), 0.0), InvalidInput);
  CHECK_THROWS_AS(extract_trace(log, random_image(kDims, 1), 1.0), InvalidInput);
  CHECK_THROWS_AS(extract_trace(log, random_image(kDims, 1), 1.5), InvalidInput);
  CHECK_THROWS_AS(log.append(0, random_image(kDims, 2)), InvalidInput);
  CHECK_THROWS_AS(log.append(5, random_image(Dims{8, 8, 3}, 2)), InvalidInput);
}

TEST_CASE("single-link closure through a chain of intermediates") {
  // Each image correlates with its neighbours only; all are reached from adv.
  std::mt19937_64 rng(6);
  std::vector<double> cur = random_vector(rng, kDims.size(), 0.2, 0.8);
  std::vector<Image> chain;
  for (int k = 0; k < 8; ++k) {
    for (double& v : cur) v = std::clamp(v + std::normal_distribution<double>(0, 0.12)(rng), 0.0, 1.0);
    chain.push_back(Image::quantize(kDims, cur));
  }
  QueryLog log;
  for (std::size_t k = 0; k < chain.size(); ++k) log.append(static_cast<std::int64_t>(k), chain[k]);
  const Image& adv = chain.back();
  REQUIRE(pearson(chain.front().values(), adv.values()) < 0.5);
  ExtractionResult r = extract_trace(log, adv, 0.5);
  // Every member has a path of correlation >= r to adv through members.
  std::vector<bool> reached(r.trace.size(), false);
  reached.back() = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      if (reached[i]) continue;
      for (std::size_t j = 0; j < r.trace.size(); ++j)
        if (reached[j] && pearson(r.trace.queries[i].values(), r.trace.queries[j].values()) >= 0.5) {
          reached[i] = grew = true;
          break;
        }
    }
  }
  CHECK(std::all_of(reached.begin(), reached.end(), [](bool b) { return b; }));
  CHECK(r.trace.size() == chain.size());
}

TEST_CASE("simulated trace mixed into a benign log") {
  const Dims dims{32, 32, 3};
  SyntheticAttackSpec spec;
  spec.family = AttackFamily::BoundaryWalk;
  spec.max_queries = 300;
  spec.seed = 2;
  LabeledTrace lt = simulate(spec, random_image(dims, 77));
  MixedLog mixed = mix_into_log(lt.trace, make_benign_log(300, dims, 8), 9);
  ExtractionResult loose = extract_trace(mixed.log, lt.trace.adv(), 0.5);
  ExtractionResult strict = extract_trace(mixed.log, lt.trace.adv(), 0.9);
  PrecisionRecall a = score_extraction(loose.trace.log_indices, mixed.attack_indices);
  PrecisionRecall b = score_extraction(strict.trace.log_indices, mixed.attack_indices);
  CHECK(a.precision == 1.0);
  CHECK(a.recall >= 0.95);
  CHECK(b.recall <= a.recall);

  // Timestamp order is preserved and the result does not depend on log layout.
  CHECK(std::is_sorted(loose.trace.log_indices.begin(), loose.trace.log_indices.end()));
  ExtractionResult again = extract_trace(mixed.log, lt.trace.adv(), 0.5);
  CHECK(again.trace.log_indices == loose.trace.log_indices);
}

TEST_CASE("downscale") {
  Image flat(Dims{20, 12, 3}, std::vector<std::uint8_t>(720, 77));
  Image small = downscale(flat, 6);
  CHECK(small.dims() == Dims{6, 6, 3});
  CHECK(std::all_of(small.levels().begin(), small.levels().end(), [](std::uint8_t v) { return v == 77; }));
  Image big = random_image(Dims{224, 224, 3}, 1);
  Image s32 = downscale(big, 32);
  CHECK(s32.dims() == Dims{32, 32, 3});
  std::vector<double> vals = s32.values();
  auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  CHECK(*lo >= 0.0);
  CHECK(*hi <= 1.0);
  CHECK_THROWS_AS(downscale(flat, 0), InvalidInput);
  CHECK_THROWS_AS(downscale(flat, 13), InvalidInput);
  QueryLog log;
  log.append(4, big);
  CHECK(downscale(log, 32)[0].timestamp == 4);
}

TEST_CASE("scoring extracted indices") {
  std::vector<std::optional<std::size_t>> got{1, 2, 7, std::nullopt};
  PrecisionRecall pr = score_extraction(got, {1, 2, 3, 4});
  CHECK(pr.precision == doctest::Approx(2.0 / 3));
  CHECK(pr.recall == doctest::Approx(0.5));
}

}
