#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <crformal/classify.hpp>
#include <crformal/flows.hpp>

using namespace crformal;

namespace {

Scalar sc(int re, int im = 0) { return {Rational(re), Rational(im)}; }

const char* kHeisenberg = "Im(z2) - z1*conj(z1)";
const char* kFlat = "Im(z2)";
const char* kQuartic = "Im(z2) - (z1*conj(z1))^2";
const char* kDegenerate3 = "Im(z3) - z1*conj(z1)";
const char* kTube3 =
    "Im(z3) - (z1*conj(z1)) * (1 + z1*conj(z2)) * conj(1 + z1*conj(z2)) / "
    "(1 + Re(z1*conj(z2))) + Re(z3) * Im(z1*conj(z2)) / "
    "(1 + Re(z1*conj(z2)))";

Hypersurface heis() { return Hypersurface::from_expression(kHeisenberg, 12); }
Hypersurface flat() { return Hypersurface::from_expression(kFlat, 12); }
Hypersurface quartic() { return Hypersurface::from_expression(kQuartic, 12); }
Hypersurface degen3() { return Hypersurface::from_expression(kDegenerate3, 12); }
Hypersurface tube3(int order) {
  return Hypersurface::from_expression(kTube3, order);
}

PowerSeries divergent_parameter(int n, int order) {
  PowerSeries p(source_vars(n));
  for (int k = 1; k < order; ++k) {
    Multiindex e(n, 0);
    e[n - 1] = k;
    p.set_coefficient(e, Scalar(factorial(k)));
  }
  return p;
}

}  // namespace

TEST_CASE("tangent field search on the corpus") {
  SECTION("the sphere model admits none at bound 3, order 8") {
    CHECK_FALSE(find_tangent_field(heis(), 3, 8).has_value());
  }

  SECTION("the flat model yields the first coordinate direction") {
    auto f = find_tangent_field(flat(), 3, 8);
    REQUIRE(f.has_value());
    REQUIRE(f->dimension() == 2);
    CHECK(f->degree_bound == 3);
    CHECK(f->coefficients[0] ==
          PowerSeries::constant(source_vars(2), sc(1)));
    CHECK(f->coefficients[1].is_zero());
    CHECK(f->coefficients[1].is_exact());
  }

  SECTION("the quartic model admits none") {
    CHECK_FALSE(find_tangent_field(quartic(), 3, 8).has_value());
  }

  SECTION("the degenerate three-dimensional model yields the free direction") {
    auto f = find_tangent_field(degen3(), 3, 8);
    REQUIRE(f.has_value());
    REQUIRE(f->dimension() == 3);
    CHECK(f->coefficients[0].is_zero());
    CHECK(f->coefficients[1] ==
          PowerSeries::constant(source_vars(3), sc(1)));
    CHECK(f->coefficients[2].is_zero());
  }

  SECTION("the tube model admits none at bound 3, order 8") {
    CHECK_FALSE(find_tangent_field(tube3(12), 3, 8).has_value());
  }

  SECTION("a returned field is exactly tangent on exact data") {
    auto f = find_tangent_field(degen3(), 2, 6);
    REQUIRE(f.has_value());
    const Hypersurface h = degen3();
    const std::vector<std::string> amb = ambient_vars(3);
    PowerSeries applied(amb);
    for (int k = 0; k < 3; ++k)
      applied += f->coefficients[k].with_vars(amb) *
                 h.r_ambient().derive(source_vars(3)[k]);
    CHECK(h.restrict_z(applied).is_zero());
  }

  SECTION("verdicts agree with the degeneracy condition across the corpus") {
    struct Entry {
      Hypersurface surface;
      bool expect_field;
    };
    const Entry entries[] = {
        {heis(), false},     {flat(), true},    {quartic(), false},
        {degen3(), true},    {tube3(12), false},
    };
    for (const Entry& e : entries) {
      ClassificationReport rep = classify(e.surface, 10, 9, 4, 1);
      const ConditionReport& v = rep.conditions.back();
      REQUIRE(v.name == "V");
      CHECK(find_tangent_field(e.surface, 3, 10).has_value() ==
            e.expect_field);
      CHECK(v.holds == !e.expect_field);
    }
  }

  SECTION("validation") {
    PowerSeries skew(graph_vars(2));
    skew.set_coefficient({0, 1, 1}, sc(1));  // zeta-free part absent, w part not
    CHECK_THROWS_AS(find_tangent_field(Hypersurface(2, skew), 2, 6),
                    std::invalid_argument);
    CHECK_THROWS_AS(find_tangent_field(heis(), -1, 6), std::invalid_argument);
    CHECK_THROWS_AS(find_tangent_field(heis(), 2, 0), std::invalid_argument);
  }
}

TEST_CASE("formal flow of a tangent field") {
  const std::vector<std::string> fv2 = flow_vars(2);
  const std::vector<std::string> fv3 = flow_vars(3);

  SECTION("a constant field translates its coordinate, exactly") {
    auto f = find_tangent_field(degen3(), 3, 8);
    REQUIRE(f.has_value());
    const std::vector<PowerSeries> phi = flow(*f, 12);
    REQUIRE(phi.size() == 3);
    CHECK(phi[0] == PowerSeries::variable(fv3, "w1"));
    CHECK(phi[1] == PowerSeries::variable(fv3, "w2") +
                        PowerSeries::variable(fv3, "u"));
    CHECK(phi[2] == PowerSeries::variable(fv3, "z"));
    CHECK(phi[1].is_exact());
  }

  SECTION("a translation field on the flat model") {
    auto f = find_tangent_field(flat(), 3, 8);
    REQUIRE(f.has_value());
    const std::vector<PowerSeries> phi = flow(*f, 10);
    CHECK(phi[0] == PowerSeries::variable(fv2, "w1") +
                        PowerSeries::variable(fv2, "u"));
    CHECK(phi[1] == PowerSeries::variable(fv2, "z"));
  }

  SECTION("a linear field exponentiates, truncated") {
    const TangentField euler{
        {PowerSeries::variable(source_vars(2), "w1"),
         PowerSeries(source_vars(2))},
        1};
    const std::vector<PowerSeries> phi = flow(euler, 8);
    REQUIRE(phi.size() == 2);
    CHECK_FALSE(phi[0].is_exact());
    CHECK(phi[0].known_order() == 8);
    for (int m = 0; m < 7; ++m) {
      Multiindex e{1, 0, m};
      CHECK(phi[0].coefficient(e) == Scalar(Rational(1) / factorial(m)));
    }
    CHECK(phi[1] == PowerSeries::variable(fv2, "z").truncated(8));
  }

  SECTION("the flow solves its differential equation") {
    const TangentField euler{
        {PowerSeries::variable(source_vars(2), "w1"),
         PowerSeries(source_vars(2))},
        1};
    const std::vector<PowerSeries> phi = flow(euler, 8);
    // d/du phi_1 = phi_1 and d/du phi_2 = 0, one order below the cap.
    CHECK((phi[0].derive("u") - phi[0]).truncated(7).is_zero());
    CHECK(phi[1].derive("u").is_zero());
  }

  SECTION("the flow satisfies the group law") {
    const TangentField euler{
        {PowerSeries::variable(source_vars(2), "w1"),
         PowerSeries(source_vars(2))},
        1};
    const int order = 8;
    const std::vector<PowerSeries> phi = flow(euler, order);
    std::vector<std::string> both = fv2;
    both.push_back("v");
    const PowerSeries u = PowerSeries::variable(both, "u");
    const PowerSeries v = PowerSeries::variable(both, "v");
    std::vector<PowerSeries> inner;
    for (const PowerSeries& c : phi) inner.push_back(c.with_vars(both));
    // phi(phi(t, u), v) against phi(t, u + v).
    for (std::size_t k = 0; k < phi.size(); ++k) {
      PowerSeries lhs =
          phi[k].compose({inner[0], inner[1], v});
      PowerSeries rhs = phi[k].with_vars(both).substitute("u", u + v);
      CHECK((lhs - rhs).truncated(order).is_zero());
    }
  }

  SECTION("validation") {
    const TangentField euler{
        {PowerSeries::variable(source_vars(2), "w1"),
         PowerSeries(source_vars(2))},
        1};
    CHECK_THROWS_AS(flow(euler, 0), std::invalid_argument);
    const TangentField wrong_vars{
        {PowerSeries::variable(graph_vars(2), "w1"),
         PowerSeries(graph_vars(2))},
        1};
    CHECK_THROWS_AS(flow(wrong_vars, 4), std::invalid_argument);
    // Coefficients known to too low an order exhaust during iteration.
    const TangentField starved{
        {PowerSeries::variable(source_vars(2), "w1").truncated(2) *
             PowerSeries::variable(source_vars(2), "w1").truncated(2),
         PowerSeries(source_vars(2), 2)},
        2};
    CHECK_THROWS_AS(flow(starved, 8), std::runtime_error);
  }
}

TEST_CASE("self-map from a divergent reparametrization") {
  SECTION("the degenerate model produces the shifted map") {
    const Hypersurface h = degen3();
    auto f = find_tangent_field(h, 3, 8);
    REQUIRE(f.has_value());
    const SelfMapReport rep = nonconvergent_selfmap(h, *f, 12);

    const std::vector<std::string> src = source_vars(3);
    CHECK(rep.map.components()[0] == PowerSeries::variable(src, "w1"));
    CHECK(rep.map.components()[1] ==
          PowerSeries::variable(src, "w2") + divergent_parameter(3, 12));
    CHECK(rep.map.components()[2] == PowerSeries::variable(src, "z"));

    CHECK(rep.residual.is_zero());
    CHECK(rep.residual.known_order() == 12);
    CHECK(rep.jacobian_determinant == sc(1));
    CHECK(rep.order == 12);
    CHECK(rep.direction_index == 1);
    CHECK(rep.record() ==
          "selfmap status=ok order=12 direction=a2 model=u=sum_{k=1}^{11} "
          "k!*z^k");
  }

  SECTION("the flat model produces a shift in the first coordinate") {
    const Hypersurface h = flat();
    auto f = find_tangent_field(h, 3, 8);
    REQUIRE(f.has_value());
    const SelfMapReport rep = nonconvergent_selfmap(h, *f, 10);
    const std::vector<std::string> src = source_vars(2);
    CHECK(rep.map.components()[0] ==
          PowerSeries::variable(src, "w1") + divergent_parameter(2, 10));
    CHECK(rep.map.components()[1] == PowerSeries::variable(src, "z"));
    CHECK(rep.direction_index == 0);
    CHECK(rep.residual.is_zero());
    CHECK(check_invertible(rep.map).invertible());
  }

  SECTION("the output passes the independent tangency check") {
    const Hypersurface h = degen3();
    auto f = find_tangent_field(h, 3, 8);
    const SelfMapReport rep = nonconvergent_selfmap(h, *f, 10);
    CHECK(tangency_check(rep.map, h, h, 10).is_zero());
  }

  SECTION("a non-tangent field is rejected") {
    const TangentField outward{
        {PowerSeries::variable(source_vars(2), "w1"),
         PowerSeries(source_vars(2))},
        1};
    CHECK_THROWS_AS(nonconvergent_selfmap(heis(), outward, 8),
                    std::invalid_argument);
  }

  SECTION("dimensions and orders are validated") {
    auto f = find_tangent_field(flat(), 3, 8);
    REQUIRE(f.has_value());
    CHECK_THROWS_AS(nonconvergent_selfmap(degen3(), *f, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(nonconvergent_selfmap(flat(), *f, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("tangent field serialization") {
  SECTION("round trip") {
    auto f = find_tangent_field(degen3(), 3, 8);
    REQUIRE(f.has_value());
    std::ostringstream os;
    f->save(os);
    std::istringstream is(os.str());
    const TangentField back = TangentField::load(is);
    REQUIRE(back.dimension() == 3);
    CHECK(back.degree_bound == 3);
    for (int k = 0; k < 3; ++k)
      CHECK(back.coefficients[k] == f->coefficients[k]);
  }

  SECTION("text form") {
    auto f = find_tangent_field(flat(), 1, 6);
    REQUIRE(f.has_value());
    std::ostringstream os;
    f->save(os);
    CHECK(os.str() ==
          "field n=2 degree_bound=1\n"
          "series tag=a1 vars=w1,z order=exact terms=1\n"
          "exp=[0,0] coeff=1/1+0/1*i\n"
          "series tag=a2 vars=w1,z order=exact terms=0\n");
  }

  SECTION("a mistagged record is rejected") {
    std::istringstream is(
        "field n=2 degree_bound=1\n"
        "series tag=a2 vars=w1,z order=exact terms=0\n"
        "series tag=a1 vars=w1,z order=exact terms=0\n");
    CHECK_THROWS_AS(TangentField::load(is), std::runtime_error);
  }
}
