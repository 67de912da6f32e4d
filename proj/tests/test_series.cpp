#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>
#include <vector>

#include <crformal/io.hpp>
#include <crformal/series.hpp>

using namespace crformal;

namespace {

Scalar sc(long re, long im = 0) { return {Rational(re), Rational(im)}; }

Scalar q(long num, long den, long inum = 0, long iden = 1) {
  return {Rational(num, den), Rational(inum, iden)};
}

PowerSeries random_series(std::mt19937_64& rng,
                          const std::vector<std::string>& vars, int order) {
  PowerSeries s(vars, order);
  std::uniform_int_distribution<int> coeff(-4, 4);
  for (const auto& e :
       multiindices_in_range(static_cast<int>(vars.size()), 0, order - 1))
    s.set_coefficient(e, Scalar(Rational(coeff(rng)), Rational(coeff(rng))));
  return s;
}

}  // namespace

TEST_CASE("scalar arithmetic is exact") {
  Scalar a = q(1, 2, 3, 4);
  Scalar b = q(-2, 3, 1, 6);
  CHECK(a + b == q(-1, 6, 11, 12));
  CHECK(a * b == Scalar(Rational(1, 2) * Rational(-2, 3) -
                            Rational(3, 4) * Rational(1, 6),
                        Rational(1, 2) * Rational(1, 6) +
                            Rational(3, 4) * Rational(-2, 3)));
  CHECK(a / a == sc(1));
  CHECK((a / b) * b == a);
  CHECK(a.conj() == q(1, 2, -3, 4));
  CHECK((a * a.conj()).is_real());
  CHECK(Scalar::i() * Scalar::i() == sc(-1));
  CHECK(a.norm() == Rational(1, 4) + Rational(9, 16));
}

TEST_CASE("scalar text form round-trips") {
  CHECK(to_string(sc(2)) == "2/1+0/1*i");
  CHECK(to_string(q(-1, 2, -3, 4)) == "-1/2-3/4*i");
  CHECK(to_string(Scalar::i()) == "0/1+1/1*i");
  CHECK(parse_scalar("2/1+0/1*i") == sc(2));
  CHECK(parse_scalar("-1/2-3/4*i") == q(-1, 2, -3, 4));
  CHECK(parse_scalar("1/2+-3/4*i") == q(1, 2, -3, 4));
  CHECK(parse_scalar("4/8+0/1*i") == q(1, 2));
  CHECK_THROWS(parse_scalar("1/2"));
  CHECK_THROWS(parse_scalar("x+0/1*i"));
}

TEST_CASE("graded lexicographic order") {
  std::vector<Multiindex> expected = {{0, 0}, {0, 1}, {1, 0},
                                      {0, 2}, {1, 1}, {2, 0}};
  auto got = multiindices_in_range(2, 0, 2);
  CHECK(got == expected);
  for (std::size_t k = 0; k + 1 < expected.size(); ++k) {
    CHECK(grlex_less(expected[k], expected[k + 1]));
    CHECK_FALSE(grlex_less(expected[k + 1], expected[k]));
  }
}

TEST_CASE("multiindex combinatorics") {
  CHECK(factorial(5) == Rational(120));
  CHECK(multi_factorial({2, 3}) == Rational(12));
  CHECK(binomial(7, 3) == Rational(35));
  CHECK(multi_binomial({3, 2}, {1, 1}) == Rational(6));
  CHECK(shift_binomial({1, 0}, {1, 1}) == Rational(2));
  CHECK(multiindices_of_degree(3, 2).size() == 6);
}

TEST_CASE("series invariants and known order bookkeeping") {
  std::vector<std::string> v = {"x", "y"};
  PowerSeries a(v, 5);
  a.set_coefficient({1, 0}, sc(2));
  a.set_coefficient({0, 3}, sc(0, 1));
  CHECK(a.known_order() == 5);
  CHECK(a.vanishing_order() == 1);
  CHECK(a.first_term()->first == Multiindex{1, 0});

  PowerSeries b(v, 3);
  b.set_coefficient({0, 1}, sc(1));
  PowerSeries s = a + b;
  CHECK(s.known_order() == 3);
  CHECK(s.coefficient({0, 1}) == sc(1));

  PowerSeries p = a * b;
  CHECK(p.known_order() == 3);
  CHECK(p.coefficient({1, 1}) == sc(2));

  CHECK(a.truncated(2).terms().size() == 1);
  CHECK(a.derive("x").known_order() == 4);
  CHECK(a.derive("y").coefficient({0, 2}) == sc(0, 3));
  CHECK(a.integrate("x").known_order() == 6);
  CHECK(a.integrate("x").coefficient({2, 0}) == sc(1));

  PowerSeries thin(v, 1);
  CHECK_THROWS(thin.derive("x"));
  CHECK_THROWS(a.derive("zz"));

  PowerSeries other({"x", "z"}, 5);
  CHECK_THROWS(a + other);

  PowerSeries exact = PowerSeries::variable(v, "x");
  CHECK(exact.is_exact());
  CHECK(exact.derive("x").is_exact());
  CHECK((exact * a).known_order() == 5);
}

TEST_CASE("reciprocal of 2 + x") {
  PowerSeries u =
      PowerSeries::constant({"x"}, sc(2)) + PowerSeries::variable({"x"}, "x");
  CHECK_THROWS(u.reciprocal());
  PowerSeries r = u.truncated(8).reciprocal();
  std::vector<Scalar> expected = {q(1, 2),   q(-1, 4),  q(1, 8),   q(-1, 16),
                                  q(1, 32),  q(-1, 64), q(1, 128), q(-1, 256)};
  for (int k = 0; k < 8; ++k) CHECK(r.coefficient({k}) == expected[k]);
  PowerSeries prod = u.truncated(8) * r;
  CHECK(prod == PowerSeries::constant({"x"}, sc(1), 8));

  PowerSeries zc({"x"}, 8);
  zc.set_coefficient({1}, sc(1));
  CHECK_THROWS(zc.reciprocal());
}

TEST_CASE("implicit solution of y = x + y^2 gives Catalan numbers") {
  std::vector<std::string> v = {"x", "y"};
  PowerSeries F = PowerSeries::variable(v, "y") - PowerSeries::variable(v, "x") -
                  PowerSeries::variable(v, "y") * PowerSeries::variable(v, "y");
  CHECK_THROWS(implicit_solve(F, "y"));
  PowerSeries y = implicit_solve(F, "y", 8);
  std::vector<long> catalan = {0, 1, 1, 2, 5, 14, 42, 132};
  for (int k = 0; k < 8; ++k) CHECK(y.coefficient({k}) == sc(catalan[k]));
  PowerSeries residual = F.compose(
      {PowerSeries::variable({"x"}, "x", 8), y});
  CHECK(residual.is_zero());

  PowerSeries G = PowerSeries::variable(v, "x") * PowerSeries::variable(v, "y");
  CHECK_THROWS(implicit_solve(G, "y", 6));
}

TEST_CASE("composite Taylor coefficients via the partition expansion") {
  PowerSeries psi({"y"});
  psi.set_coefficient({0}, sc(1));
  psi.set_coefficient({1}, sc(2));
  psi.set_coefficient({2}, q(-3, 2));
  psi.set_coefficient({3}, sc(0, 1));
  psi.set_coefficient({4}, q(5, 7));
  PowerSeries phi({"x"});
  phi.set_coefficient({1}, q(1, 2));
  phi.set_coefficient({2}, sc(1));
  phi.set_coefficient({3}, sc(0, -1));
  phi.set_coefficient({4}, q(2, 3));

  CHECK(faa_di_bruno(psi, phi, 1) == sc(1));
  CHECK(faa_di_bruno(psi, phi, 2) == q(13, 8));
  CHECK(faa_di_bruno(psi, phi, 3) == q(-3, 2, -15, 8));
  CHECK(faa_di_bruno(psi, phi, 4) == q(-41, 336, 9, 4));

  PowerSeries composite = psi.compose({phi});
  std::vector<Scalar> expected = {sc(1),          sc(1),
                                  q(13, 8),       q(-3, 2, -15, 8),
                                  q(-41, 336, 9, 4), q(3, 28, 9, 2),
                                  q(25, 7, 8, 7), q(14, 3, 5, 14)};
  for (int k = 0; k < 8; ++k) CHECK(composite.coefficient({k}) == expected[k]);
  for (int n = 1; n <= 4; ++n)
    CHECK(faa_di_bruno(psi, phi, n) == composite.coefficient({n}));

  CHECK_THROWS(faa_di_bruno(psi.truncated(3), phi, 4));
}

TEST_CASE("multivariate composition") {
  std::vector<std::string> uv = {"u", "v"};
  PowerSeries one_plus_u =
      PowerSeries::constant(uv, sc(1), 6) + PowerSeries::variable(uv, "u", 6);
  PowerSeries F = PowerSeries::variable(uv, "v", 6) * one_plus_u.reciprocal() +
                  pow(PowerSeries::variable(uv, "u", 6), 3);

  std::vector<std::string> xy = {"x", "y"};
  PowerSeries x = PowerSeries::variable(xy, "x");
  PowerSeries y = PowerSeries::variable(xy, "y");
  PowerSeries u = x + Scalar::i() * y * y;
  PowerSeries v = y - x * y;
  PowerSeries g = F.compose({u, v});
  CHECK(g.known_order() == 6);

  PowerSeries expected(xy, 6);
  expected.set_coefficient({0, 1}, sc(1));
  expected.set_coefficient({1, 1}, sc(-2));
  expected.set_coefficient({0, 3}, sc(0, -1));
  expected.set_coefficient({2, 1}, sc(2));
  expected.set_coefficient({3, 0}, sc(1));
  expected.set_coefficient({1, 3}, sc(0, 3));
  expected.set_coefficient({2, 2}, sc(0, 3));
  expected.set_coefficient({3, 1}, sc(-2));
  expected.set_coefficient({0, 5}, sc(-1));
  expected.set_coefficient({1, 4}, sc(-3));
  expected.set_coefficient({2, 3}, sc(0, -5));
  expected.set_coefficient({4, 1}, sc(2));
  CHECK(g == expected);

  PowerSeries bad = PowerSeries::constant(xy, sc(1), 6) + x;
  CHECK_THROWS(F.compose({bad, v}));
  CHECK_THROWS(F.compose({u}));
}

TEST_CASE("variable surgery") {
  std::vector<std::string> v = {"x", "y"};
  PowerSeries a(v, 6);
  a.set_coefficient({2, 1}, sc(3, -1));

  PowerSeries wide = a.with_vars({"t", "y", "x"});
  CHECK(wide.coefficient({0, 1, 2}) == sc(3, -1));
  CHECK_THROWS(a.with_vars({"x", "t"}));

  PowerSeries renamed = a.renamed_vars({"p", "q"});
  CHECK(renamed.coefficient({2, 1}) == sc(3, -1));
  CHECK_THROWS(a.renamed_vars({"p"}));

  PowerSeries back = wide.restricted_to_vars({"x", "y"});
  CHECK(back == a);
  CHECK_THROWS(wide.restricted_to_vars({"t", "y"}));

  PowerSeries slice = a.coefficient_slice({"x"}, {2});
  CHECK(slice.vars() == std::vector<std::string>{"y"});
  CHECK(slice.known_order() == 4);
  CHECK(slice.coefficient({1}) == sc(3, -1));

  PowerSeries shifted = a.substitute(
      "y", PowerSeries::variable(v, "x", 6) + PowerSeries::variable(v, "y", 6));
  CHECK(shifted.coefficient({3, 0}) == sc(3, -1));
  CHECK(shifted.coefficient({2, 1}) == sc(3, -1));

  PowerSeries conj = a.conjugated();
  CHECK(conj.coefficient({2, 1}) == sc(3, 1));
}

TEST_CASE("ring identities on pseudorandom series") {
  std::mt19937_64 rng(7);
  std::vector<std::string> v = {"x", "y", "z"};
  for (int trial = 0; trial < 4; ++trial) {
    PowerSeries a = random_series(rng, v, 6);
    PowerSeries b = random_series(rng, v, 6);
    PowerSeries c = random_series(rng, v, 6);
    CHECK((a + b) + c == a + (b + c));
    CHECK(a + b == b + a);
    CHECK(a * b == b * a);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * (b + c) == a * b + a * c);
    CHECK(a + (-a) == PowerSeries(v, 6));
    CHECK(PowerSeries::constant(v, sc(1), 6) * a == a);
  }
}

TEST_CASE("reciprocal inverts units") {
  std::mt19937_64 rng(11);
  std::vector<std::string> v = {"x", "y"};
  PowerSeries u = random_series(rng, v, 7);
  u.set_coefficient({0, 0}, q(3, 2, 1, 5));
  PowerSeries r = u.reciprocal();
  CHECK(u * r == PowerSeries::constant(v, sc(1), 7));
}

TEST_CASE("series records round-trip bit for bit") {
  std::mt19937_64 rng(13);
  PowerSeries a = random_series(rng, {"w1", "zeta1", "xi"}, 5);
  std::string text = series_to_string(a, "thetabar");
  std::istringstream in(text);
  SeriesRecord rec = read_series_record(in);
  CHECK(rec.tag == "thetabar");
  CHECK(rec.series == a);
  CHECK(series_to_string(rec.series, rec.tag) == text);

  std::string untagged = series_to_string(a);
  CHECK(untagged.compare(0, 12, "series vars=") == 0);
  std::istringstream in2(untagged);
  SeriesRecord rec2 = read_series_record(in2);
  CHECK(rec2.tag.empty());
  CHECK(rec2.series == a);

  PowerSeries exact = PowerSeries::variable({"x"}, "x");
  std::string etext = series_to_string(exact);
  CHECK(etext.find("order=exact") != std::string::npos);
  std::istringstream in3(etext);
  CHECK(read_series_record(in3).series == exact);
}

TEST_CASE("series record parsing rejects malformed input") {
  auto reject = [](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS(read_series_record(in));
  };
  reject("series vars=x order=3 terms=1\nexp=[5] coeff=1/1+0/1*i\n");
  reject("series vars=x order=3 terms=1\nexp=[0] coeff=0/1+0/1*i\n");
  reject("series vars=x order=3 terms=2\nexp=[1] coeff=1/1+0/1*i\nexp=[0] coeff=1/1+0/1*i\n");
  reject("series vars=x order=3 terms=1\nexp=[0,1] coeff=1/1+0/1*i\n");
  reject("series vars=x order=0 terms=0\n");
  reject("nonsense vars=x order=3 terms=0\n");
  reject("series vars=x order=3 terms=1\n");
}

TEST_CASE("exact evaluation") {
  std::vector<std::string> v = {"x", "y"};
  PowerSeries a(v, 10);
  a.set_coefficient({2, 0}, sc(1));
  a.set_coefficient({0, 1}, sc(0, 2));
  Scalar got = a.eval({q(1, 2), q(-1, 3)});
  CHECK(got == Scalar(Rational(1, 4), Rational(-2, 3)));
}

TEST_CASE("power helpers") {
  std::vector<std::string> v = {"x", "y"};
  PowerSeries x = PowerSeries::variable(v, "x", 8);
  PowerSeries y = PowerSeries::variable(v, "y", 8);
  CHECK(pow(x + y, 2) == x * x + sc(2) * x * y + y * y);
  CHECK(pow(x, 0) == PowerSeries::constant(v, sc(1)));
  CHECK(monomial_of({x, y}, {2, 1}) == x * x * y);
}
