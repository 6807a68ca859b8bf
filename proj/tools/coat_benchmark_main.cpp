// Writes the deterministic Coat-layout benchmark dataset used by the test
// suite: lcdr-coat-benchmark <output-dir> [seed]
#include <cstdlib>
#include <iostream>
#include <string>

#include "lcdr/coatbench.hpp"
#include "lcdr/errors.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::cerr << "usage: lcdr-coat-benchmark <output-dir> [seed]\n";
    return lcdr::exit_input_error;
  }
  lcdr::CoatBenchConfig cfg;
  if (argc == 3) cfg.seed = std::strtoull(argv[2], nullptr, 10);
  try {
    lcdr::write_coat_benchmark(argv[1], cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lcdr::exit_input_error;
  }
  std::cout << cfg.num_users << " users x " << cfg.num_items << " items -> " << argv[1]
            << "\n";
  return 0;
}
