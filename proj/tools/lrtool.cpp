// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "lrpolicy/cli.hpp"

int main(int argc, char **argv) {
  return lrpolicy::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
