// Builds a formal self-map of a holomorphically degenerate hypersurface by
// flowing along a tangent holomorphic field for a factorially divergent
// "time", then certifies that the result is an invertible formal map that
// is tangent to the hypersurface at every computed order.  The coefficients
// grow like k!, so the map cannot come from any convergent one.
//
// Usage: divergent_selfmap [data-dir]

#include <fstream>
#include <iostream>
#include <string>

#include <crformal/flows.hpp>

using namespace crformal;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  const int order = 12;
  const int degree_bound = 3;

  try {
    std::ifstream in(dir + "/degen3.hsf");
    if (!in) throw std::runtime_error("cannot open " + dir + "/degen3.hsf");
    const Hypersurface h = Hypersurface::load(in);

    std::cout << "searching for a tangent field, coefficient degree <= "
              << degree_bound << ", order " << order << "\n";
    const auto field = find_tangent_field(h, degree_bound, order);
    if (!field) {
      std::cout << "none found; the surface resists the construction\n";
      return 2;
    }
    std::cout << "field found:\n";
    field->save(std::cout);

    const std::vector<PowerSeries> phi = flow(*field, order);
    std::cout << "flow components over " << flow_vars(h.n()).back()
              << "-parametrized source:\n";
    for (const PowerSeries& c : phi) write_series_record(std::cout, c);

    const SelfMapReport rep = nonconvergent_selfmap(h, *field, order);
    std::cout << rep.record() << "\n";
    std::cout << "jacobian at 0: " << to_string(rep.jacobian_determinant)
              << "\n";
    std::cout << "tangency residual zero to order "
              << rep.residual.known_order() << ": "
              << (rep.residual.is_zero() ? "yes" : "NO") << "\n";
    std::cout << "self-map manifest:\n";
    rep.map.save(std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
