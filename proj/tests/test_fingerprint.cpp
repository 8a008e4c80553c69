#include <doctest.h>

#include <algorithm>

#include "sea/error.hpp"
#include "sea/fingerprint.hpp"
#include "sea/simulator.hpp"
#include "support.hpp"

using namespace sea;

namespace {

const Dims kDims{32, 32, 3};

SyntheticAttackSpec variant(AttackFamily family, Norm norm, std::uint64_t seed) {
  SyntheticAttackSpec spec;
  spec.family = family;
  spec.norm = norm;
  spec.seed = seed;
  return spec;
}

const ProcedureDB& reference_db() {
  static const ProcedureDB db = [] {
    std::vector<LabeledTrace> traces;
    std::uint64_t seed = 1;
    for (SyntheticAttackSpec spec : attack_catalog()) {
      spec.seed = seed;
      traces.push_back(simulate(spec, random_image(kDims, 500 + seed++)));
    }
    return reference_procedures(traces);
  }();
  return db;
}

Fingerprint fingerprint_of(const SyntheticAttackSpec& spec, const std::string& incident) {
  return fingerprint_trace(simulate(spec, random_image(kDims, 900 + spec.seed)).trace, reference_db(), incident);
}

Fingerprint constant_fingerprint(const std::vector<std::string>& order, const std::string& attack,
                                 const std::string& incident, std::size_t hot) {
  const std::size_t m = order.size();
  std::vector<double> a(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) a[i * m + hot] = 1.0;
  Fingerprint fp;
  fp.matrix = TransitionMatrix(m, a);
  fp.attack_id = attack;
  fp.incident_id = incident;
  fp.procedure_order = order;
  return fp;
}

}  // namespace

TEST_SUITE("fingerprint") {

TEST_CASE("a trace of repeated queries stays in NULL") {
  Trace trace;
  Image x = random_image(kDims, 3);
  for (int k = 0; k < 500; ++k) trace.queries.push_back(x);
  trace.log_indices.assign(trace.queries.size(), std::nullopt);
  Fingerprint fp = fingerprint_trace(trace, ProcedureDB::with_generics(), "dup");
  CHECK(fp.matrix(0, 0) >= 0.99);
  CHECK(fp.procedure_order == std::vector<std::string>{"NULL", "LS", "IMG"});
  CHECK(fp.trace_length == 500);
  CHECK(fp.attack_id == kUnknownAttack);
  CHECK_THROWS_AS(fingerprint_trace(Trace{{x}, {std::nullopt}}, ProcedureDB::with_generics(), "x"), InvalidInput);
}

TEST_CASE("independent runs of one attack give similar fingerprints") {
  auto a = fingerprint_of(variant(AttackFamily::GaussGrad, Norm::L2, 11), "a").flatten();
  auto b = fingerprint_of(variant(AttackFamily::GaussGrad, Norm::L2, 12), "b").flatten();
  CHECK(cosine_sim(a, b) >= 0.9);
  auto c = fingerprint_of(variant(AttackFamily::BoundaryWalk, Norm::L2, 13), "c").flatten();
  CHECK(cosine_sim(a, c) < cosine_sim(a, b));
}

TEST_CASE("norm variants of a family are closer to each other than to other families") {
  for (auto family : {AttackFamily::GaussGrad, AttackFamily::SubspaceNoise}) {
    auto l2 = fingerprint_of(variant(family, Norm::L2, 21), "l2").flatten();
    auto linf = fingerprint_of(variant(family, Norm::Linf, 22), "linf").flatten();
    double within = cosine_sim(l2, linf);
    for (auto other : {AttackFamily::BlockPattern, AttackFamily::RaySearch, AttackFamily::SignStep, AttackFamily::EvoGrad}) {
      Norm norm = other == AttackFamily::SignStep ? Norm::L2 : Norm::Linf;
      auto o = fingerprint_of(variant(other, norm, 23), "o").flatten();
      CHECK(within > cosine_sim(l2, o));
      CHECK(within > cosine_sim(linf, o));
    }
  }
}

TEST_CASE("matching against attack averages") {
  std::vector<std::string> order{"NULL", "LS", "IMG"};
  FingerprintDB db;
  db.add(constant_fingerprint(order, "x", "i1", 0));
  db.add(constant_fingerprint(order, "y", "i2", 1));
  db.add(constant_fingerprint(order, "y", "i3", 2));
  auto ranking = match_fingerprint(constant_fingerprint(order, kUnknownAttack, "q", 0), db);
  REQUIRE(ranking.size() == 2);
  CHECK(ranking[0].attack_id == "x");
  CHECK(ranking[0].similarity == doctest::Approx(1.0));
  CHECK(ranking[1].similarity == doctest::Approx(0.0));
  CHECK(db.attack_ids() == std::vector<std::string>{"x", "y"});

  // The mean does not depend on insertion order.
  FingerprintDB reordered;
  reordered.add(constant_fingerprint(order, "y", "i3", 2));
  reordered.add(constant_fingerprint(order, "x", "i1", 0));
  reordered.add(constant_fingerprint(order, "y", "i2", 1));
  auto q = constant_fingerprint(order, kUnknownAttack, "q", 1);
  auto r1 = match_fingerprint(q, db), r2 = match_fingerprint(q, reordered);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].attack_id == r2[i].attack_id);
    CHECK(r1[i].similarity == doctest::Approx(r2[i].similarity));
  }

  // Equal similarity falls back to id order.
  FingerprintDB tie;
  tie.add(constant_fingerprint(order, "b", "t1", 0));
  tie.add(constant_fingerprint(order, "a", "t2", 0));
  CHECK(match_fingerprint(q, tie)[0].attack_id == "a");

  CHECK_THROWS_AS(match_fingerprint(q, FingerprintDB{}), InvalidInput);
  CHECK_THROWS_AS(db.add(constant_fingerprint(order, "z", "i1", 0)), InvalidInput);
  auto other = constant_fingerprint({"NULL", "LS", "N1"}, kUnknownAttack, "o", 0);
  CHECK_THROWS_AS(match_fingerprint(other, db), IncompatibleDatabase);
}

TEST_CASE("alignment reorders rows and columns") {
  std::vector<std::string> order{"NULL", "LS", "IMG"};
  Fingerprint fp = constant_fingerprint(order, "x", "i", 1);
  Fingerprint al = fp.aligned_to({"LS", "IMG", "NULL"});
  CHECK(al.procedure_order == std::vector<std::string>{"LS", "IMG", "NULL"});
  for (std::size_t i = 0; i < 3; ++i) CHECK(al.matrix(i, 0) == 1.0);
  CHECK_THROWS_AS(fp.aligned_to({"LS", "IMG"}), IncompatibleDatabase);
}

TEST_CASE("fingerprint JSON round trip") {
  Fingerprint fp = fingerprint_of(variant(AttackFamily::EvoGrad, Norm::Linf, 31), "inc-1");
  fp.attack_id = "evo";
  Fingerprint back = fingerprint_from_json(to_json(fp));
  CHECK(back.incident_id == "inc-1");
  CHECK(back.attack_id == "evo");
  CHECK(back.procedure_order == fp.procedure_order);
  CHECK(back.trace_length == fp.trace_length);
  CHECK(back.dims == fp.dims);
  CHECK(back.created_at == fp.created_at);
  auto a = fp.flatten(), b = back.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  auto j = to_json(fp);
  j.erase("matrix");
  CHECK_THROWS_AS(fingerprint_from_json(j), FormatError);
}

}
