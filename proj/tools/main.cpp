#include <vector>

#include "qtraj/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qtraj::dispatch(args);
}
