#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <crformal/classify.hpp>
#include <crformal/segre.hpp>

using namespace crformal;

namespace {

const char* kHeisenberg = "Im(z2) - z1*conj(z1)";
const char* kFlat = "Im(z2)";
const char* kQuartic = "Im(z2) - (z1*conj(z1))^2";
const char* kDegenerate3 = "Im(z3) - z1*conj(z1)";
const char* kTube3 =
    "Im(z3) - (z1*conj(z1)) * (1 + z1*conj(z2)) * conj(1 + z1*conj(z2)) / "
    "(1 + Re(z1*conj(z2))) + Re(z3) * Im(z1*conj(z2)) / (1 + Re(z1*conj(z2)))";

Hypersurface heisenberg() { return Hypersurface::from_expression(kHeisenberg, 12); }
Hypersurface flat() { return Hypersurface::from_expression(kFlat, 12); }
Hypersurface quartic() { return Hypersurface::from_expression(kQuartic, 12); }
Hypersurface degenerate3() { return Hypersurface::from_expression(kDegenerate3, 12); }
Hypersurface tube3(int order = 12) { return Hypersurface::from_expression(kTube3, order); }

}  // namespace

TEST_CASE("jet map components on the quadric") {
  const Hypersurface h = heisenberg();
  const auto jets = jet_morphism(h, 1);
  REQUIRE(jets.size() == 4);  // zeta, xi, then the order-0 and order-1 jets

  const std::vector<std::string> amb = ambient_vars(2);
  const PowerSeries w = PowerSeries::variable(amb, "w1");
  const PowerSeries z = PowerSeries::variable(amb, "z");
  const PowerSeries zeta = PowerSeries::variable(amb, "zeta1");
  const PowerSeries xi = PowerSeries::variable(amb, "xi");

  CHECK(jets[0] == zeta);
  CHECK(jets[1] == xi);
  CHECK(jets[2] == xi - z + zeta * w * Scalar(Rational(0), Rational(2)));
  CHECK(jets[3] == w * Scalar(Rational(0), Rational(2)));

  // The order-0 component vanishes on the hypersurface, both ways.
  CHECK(h.restrict_z(jets[2]).is_zero());
  CHECK(h.restrict_xi(jets[2]).is_zero());
}

TEST_CASE("jet map components on flat and quartic surfaces") {
  const auto flat_jets = jet_morphism(flat(), 2);
  REQUIRE(flat_jets.size() == 5);
  const std::vector<std::string> amb = ambient_vars(2);
  CHECK(flat_jets[2] ==
        PowerSeries::variable(amb, "xi") - PowerSeries::variable(amb, "z"));
  CHECK(flat_jets[3].is_zero());
  CHECK(flat_jets[4].is_zero());

  const auto q_jets = jet_morphism(quartic(), 2);
  REQUIRE(q_jets.size() == 5);
  const PowerSeries w = PowerSeries::variable(amb, "w1");
  CHECK(q_jets[4] == w * w * Scalar(Rational(0), Rational(4)));

  for (const Hypersurface& h : {heisenberg(), flat(), quartic(), degenerate3(), tube3()}) {
    const auto jets = jet_morphism(h, 1);
    CHECK(h.restrict_z(jets[h.n()]).is_zero());
  }
}

TEST_CASE("chain parametrizations") {
  const Hypersurface h = heisenberg();

  const auto depth1 = chain_map(h, 1);
  REQUIRE(depth1.size() == 2);
  const std::vector<std::string> wv = {"w1"};
  CHECK(depth1[0] == PowerSeries::variable(wv, "w1"));
  CHECK(depth1[1].is_zero());

  const auto depth2 = chain_map(h, 2);
  REQUIRE(depth2.size() == 2);
  const std::vector<std::string> wzeta = {"w1", "zeta1"};
  const PowerSeries w = PowerSeries::variable(wzeta, "w1");
  const PowerSeries zeta = PowerSeries::variable(wzeta, "zeta1");
  CHECK(depth2[0] == w);
  CHECK(depth2[1] == w * zeta * Scalar(Rational(0), Rational(2)));

  CHECK_THROWS_AS(chain_map(h, 3), std::invalid_argument);
  CHECK_THROWS_AS(chain_map(h, 0), std::invalid_argument);

  const std::vector<std::string> gv = graph_vars(2);
  const Hypersurface skew(2, PowerSeries::variable(gv, "w1"));
  CHECK_THROWS_AS(chain_map(skew, 2), std::invalid_argument);
}

TEST_CASE("series determinants") {
  const std::vector<std::string> vars = {"w1", "zeta1"};
  const PowerSeries w = PowerSeries::variable(vars, "w1");
  const PowerSeries zeta = PowerSeries::variable(vars, "zeta1");
  const PowerSeries one = PowerSeries::constant(vars, Scalar(1));

  CHECK(series_det({{w}}) == w);
  CHECK(series_det({{one, w}, {zeta, one}}) == one - w * zeta);
  // Singular: two equal rows.
  CHECK(series_det({{w, zeta}, {w, zeta}}).is_zero());
}

TEST_CASE("generic rank of small maps") {
  const std::vector<std::string> vars = {"w1", "zeta1"};
  const PowerSeries w = PowerSeries::variable(vars, "w1");
  const PowerSeries zeta = PowerSeries::variable(vars, "zeta1");

  const auto full = generic_rank({w, w * zeta * Scalar(Rational(0), Rational(2))}, 7, 10);
  CHECK(full.rank == 2);
  CHECK_FALSE(full.degenerate_above);
  CHECK(full.to_record() ==
        "rank=2 certified_by=[0,1]x[0,1] degenerate_above=false order=exact seed=7");

  const auto drop = generic_rank({w, PowerSeries::constant(vars, Scalar(0))}, 7, 10);
  CHECK(drop.rank == 1);
  CHECK(drop.degenerate_above);
  CHECK(drop.rows == std::vector<int>{0});
  CHECK(drop.cols == std::vector<int>{0});

  const std::vector<std::string> v3 = {"w1", "w2", "z"};
  std::vector<PowerSeries> id;
  for (const auto& v : v3) id.push_back(PowerSeries::variable(v3, v));
  CHECK(generic_rank(id, 1, 10).rank == 3);

  // Zero map: rank 0, empty certifying minor.
  const auto zero = generic_rank({PowerSeries::constant(vars, Scalar(0))}, 3, 10);
  CHECK(zero.rank == 0);
  CHECK(zero.to_record() ==
        "rank=0 certified_by=[]x[] degenerate_above=true order=exact seed=3");
}

TEST_CASE("generic rank is seed independent and monotone in order") {
  const Hypersurface h = tube3(10);
  std::vector<PowerSeries> restricted;
  for (const PowerSeries& c : jet_morphism(h, 2)) restricted.push_back(h.restrict_xi(c));

  int base = -1;
  for (unsigned long long seed : {1ull, 2ull, 3ull, 99ull}) {
    const auto rep = generic_rank(restricted, seed, 8);
    if (base < 0) base = rep.rank;
    CHECK(rep.rank == base);
  }
  CHECK(base == 5);

  int prev = 0;
  for (int order = 2; order <= 8; order += 2) {
    const int r = generic_rank(restricted, 5, order).rank;
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("multiindex selection on the quadric") {
  const std::vector<std::string> wz = {"w1", "z"};
  const PowerSeries w = PowerSeries::variable(wz, "w1");
  const RowProvider rows = [&](const Multiindex& beta) -> std::vector<PowerSeries> {
    if (degree(beta) == 0)
      return {PowerSeries::constant(wz, Scalar(0)), PowerSeries::constant(wz, Scalar(1))};
    if (beta == Multiindex{1})
      return {PowerSeries::constant(wz, Scalar(2)), PowerSeries::constant(wz, Scalar(0))};
    return {PowerSeries::constant(wz, Scalar(0)), PowerSeries::constant(wz, Scalar(0))};
  };

  const MultiindexWitness witness = select_multiindices(rows, 1, 2, 2, 4, true);
  REQUIRE(witness.beta_list.size() == 2);
  CHECK(witness.beta_list[0] == Multiindex{1});
  CHECK(witness.beta_list[1] == Multiindex{0});
  CHECK(witness.minor_det == PowerSeries::constant(wz, Scalar(2)));
  CHECK(witness.vanishing_order == 0);

  const RowProvider dead = [&](const Multiindex&) -> std::vector<PowerSeries> {
    return {PowerSeries::constant(wz, Scalar(0)), PowerSeries::constant(wz, Scalar(0))};
  };
  CHECK_THROWS_AS(select_multiindices(dead, 1, 2, 2, 4, true), SelectionError);
}

TEST_CASE("zeta vanishing order") {
  const std::vector<std::string> vars = {"w1", "zeta1", "zeta2"};
  const PowerSeries w = PowerSeries::variable(vars, "w1");
  const PowerSeries z1 = PowerSeries::variable(vars, "zeta1");
  const PowerSeries z2 = PowerSeries::variable(vars, "zeta2");

  CHECK(kappa_order(PowerSeries::constant(vars, Scalar(2))) == 0);
  CHECK(kappa_order(w * z1 * Scalar(Rational(0), Rational(2)) + w * w * z1 * z2) == 1);
  CHECK(kappa_order(z1 * z2 + w * z1 * z1 * z2) == 2);
  CHECK_THROWS_AS(kappa_order(PowerSeries::constant(vars, Scalar(0))),
                  std::invalid_argument);
}

namespace {

struct Expected {
  bool holds[5];
  int k0[5];  // -1 where the condition fails
  bool minimal;
};

void check_classification(const Hypersurface& h, const Expected& want, int order = 10,
                          int k_max = 6, int beta_bound = 4) {
  const ClassificationReport rep = classify(h, order, k_max, beta_bound, 17);
  REQUIRE(rep.conditions.size() == 5);
  const char* names[] = {"I", "II", "III", "IV", "V"};
  for (int i = 0; i < 5; ++i) {
    INFO("condition " << names[i]);
    CHECK(rep.conditions[i].name == names[i]);
    CHECK(rep.conditions[i].holds == want.holds[i]);
    if (want.holds[i]) CHECK(rep.conditions[i].k0 == want.k0[i]);
  }
  CHECK(rep.minimality.minimal == want.minimal);
}

}  // namespace

TEST_CASE("classification of the quadric") {
  const ClassificationReport rep = classify(heisenberg(), 10, 6, 4, 17);
  check_classification(heisenberg(), {{true, true, true, true, true},
                                      {1, 1, 1, 1, 1},
                                      true});

  CHECK(rep.conditions[0].to_record(10) == "cond=I status=holds k0=1 witness=minor:2/1+0/1*i");
  CHECK(rep.conditions[1].to_record(10) == "cond=II status=holds k0=1 witness=minor:2/1+0/1*i");
  CHECK(rep.conditions[2].witness == "powers:[1]");
  CHECK(rep.conditions[3].witness == "betas:[(1)]");
  CHECK(rep.conditions[4].witness == "betas:[(1),(0)]");
  CHECK(rep.minimality.to_record() ==
        "minimal status=holds order=10 criteria=graph:h,gradient:h,rank:h");

  REQUIRE(rep.witness_v.has_value());
  const std::vector<std::string> wz = {"w1", "z"};
  CHECK(rep.witness_v->minor_det == PowerSeries::constant(wz, Scalar(2)));
  CHECK(rep.witness_v->vanishing_order == 0);
  CHECK(rep.rank_iv.rank == 1);
  CHECK(rep.rank_v.rank == 3);
}

TEST_CASE("classification of the flat surface") {
  const ClassificationReport rep = classify(flat(), 10, 6, 4, 17);
  check_classification(flat(), {{false, false, false, false, false},
                                {-1, -1, -1, -1, -1},
                                false});
  CHECK(rep.conditions[0].to_record(10) == "cond=I status=fails-to-order-10");
  CHECK(rep.minimality.to_record() ==
        "minimal status=inconclusive-to-order-10 criteria=graph:f,gradient:f,rank:f");
  CHECK(rep.rank_v.rank == 2);
}

TEST_CASE("classification of the circular quartic") {
  const ClassificationReport rep = classify(quartic(), 10, 6, 4, 17);
  check_classification(quartic(), {{false, false, true, true, true},
                                   {-1, -1, 2, 2, 2},
                                   true});
  CHECK(rep.conditions[2].witness == "powers:[2]");
  CHECK(rep.conditions[3].witness == "betas:[(2)]");
  CHECK(rep.conditions[4].witness == "betas:[(2),(0)]");

  REQUIRE(rep.witness_v.has_value());
  const std::vector<std::string> wz = {"w1", "z"};
  CHECK(rep.witness_v->minor_det == PowerSeries::variable(wz, "w1") * Scalar(4));
  REQUIRE(rep.witness_iv.has_value());
  const std::vector<std::string> wv = {"w1"};
  CHECK(rep.witness_iv->minor_det == PowerSeries::variable(wv, "w1") * Scalar(4));
}

TEST_CASE("classification of the degenerate three dimensional quadric") {
  check_classification(degenerate3(), {{false, false, false, false, false},
                                       {-1, -1, -1, -1, -1},
                                       true});
}

TEST_CASE("classification of the twisted tube") {
  const Hypersurface h = tube3(12);
  const ClassificationReport rep = classify(h, 10, 6, 4, 17);
  check_classification(h, {{false, false, false, false, true},
                           {-1, -1, -1, -1, 1},
                           true});

  REQUIRE(rep.witness_v.has_value());
  CHECK(rep.witness_v->beta_list ==
        std::vector<Multiindex>{{1, 0}, {0, 1}, {0, 0}});
  const std::vector<std::string> wz = {"w1", "w2", "z"};
  const PowerSeries z = PowerSeries::variable(wz, "z");
  CHECK(rep.witness_v->minor_det.truncated(8) == (-(z * z)).truncated(8));
  CHECK(rep.witness_v->vanishing_order == 2);
  CHECK_FALSE(rep.witness_iv.has_value());
}

TEST_CASE("classification is stable under renormalized linear changes") {
  const int order = 10;

  // Shear the quadric, renormalize, classify: same verdicts and levels.
  {
    const Hypersurface h = heisenberg();
    const std::vector<std::string> src = source_vars(2);
    const PowerSeries w = PowerSeries::variable(src, "w1");
    const PowerSeries z = PowerSeries::variable(src, "z");
    const FormalMap shear({w + z, z});
    const Hypersurface moved = pushforward(h, shear, order);
    const Hypersurface back = normalize(moved, order).surface;

    const ClassificationReport a = classify(h, order, 6, 4, 17);
    const ClassificationReport b = classify(back, order, 6, 4, 17);
    for (int i = 0; i < 5; ++i) {
      CHECK(a.conditions[i].holds == b.conditions[i].holds);
      CHECK(a.conditions[i].k0 == b.conditions[i].k0);
    }
    CHECK(a.minimality.minimal == b.minimality.minimal);
  }

  // Dilate the quartic: stays normal, verdicts unchanged.
  {
    const Hypersurface h = quartic();
    const std::vector<std::string> src = source_vars(2);
    const PowerSeries w = PowerSeries::variable(src, "w1");
    const PowerSeries z = PowerSeries::variable(src, "z");
    const FormalMap dilate({w * Scalar(2), z * Scalar(4)});
    const Hypersurface moved = pushforward(h, dilate, order);
    const Hypersurface back = normalize(moved, order).surface;

    const ClassificationReport a = classify(h, order, 6, 4, 17);
    const ClassificationReport b = classify(back, order, 6, 4, 17);
    for (int i = 0; i < 5; ++i) {
      CHECK(a.conditions[i].holds == b.conditions[i].holds);
      CHECK(a.conditions[i].k0 == b.conditions[i].k0);
    }
    CHECK(a.minimality.minimal == b.minimality.minimal);
  }
}

TEST_CASE("classification rejects bad input") {
  const std::vector<std::string> gv = graph_vars(2);
  const Hypersurface skew(2, PowerSeries::variable(gv, "w1"));
  CHECK_THROWS_AS(classify(skew, 10, 6, 4, 17), std::invalid_argument);
  CHECK_THROWS_AS(classify(heisenberg(), 1, 6, 4, 17), std::invalid_argument);
  CHECK_THROWS_AS(classify(heisenberg(), 10, 0, 4, 17), std::invalid_argument);
  CHECK_THROWS_AS(is_minimal(skew, 17, 10), std::invalid_argument);
}
