// Reads one input vector of raw integers per line (argv[1] or stdin) and
// writes the raw output vector per line (argv[2] or stdout).
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "../firmware/tiny.h"

int main(int argc, char** argv) {
  std::ifstream in_file;
  std::ofstream out_file;
  if (argc > 1) in_file.open(argv[1]);
  if (argc > 2) out_file.open(argv[2]);
  std::istream& in = argc > 1 ? static_cast<std::istream&>(in_file) : std::cin;
  std::ostream& out = argc > 2 ? static_cast<std::ostream&>(out_file) : std::cout;
  if (!in || !out) {
    std::cerr << "testbench: cannot open files\n";
    return 1;
  }
  std::string line;
  std::int64_t x[N_INPUT];
  std::int64_t y[N_OUTPUT];
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    for (int i = 0; i < N_INPUT; ++i) {
      if (!(fields >> x[i])) {
        std::cerr << "testbench: expected " << N_INPUT << " values per line\n";
        return 1;
      }
    }
    tiny(x, y);
    for (int i = 0; i < N_OUTPUT; ++i) out << (i ? " " : "") << y[i];
    out << "\n";
  }
  return 0;
}
