// Walks the bundled hypersurface corpus through the full classification:
// the five nondegeneracy conditions, their witnesses, and minimality.
//
// Usage: classify_corpus [data-dir]

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <crformal/classify.hpp>

using namespace crformal;

namespace {

Hypersurface load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Hypersurface::load(in);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  const std::vector<std::string> names = {"heis2", "flat2", "quartic2",
                                          "degen3", "ex110"};
  const int order = 10;
  const int k_max = 6;
  const int beta_bound = 4;
  const unsigned long long seed = 1;

  try {
    for (const std::string& name : names) {
      const Hypersurface h = load(dir + "/" + name + ".hsf");
      std::cout << "== " << name << " (n=" << h.n() << ") ==\n";
      const ClassificationReport rep =
          classify(h, order, k_max, beta_bound, seed);
      for (const std::string& line : rep.machine_lines())
        std::cout << "  " << line << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
