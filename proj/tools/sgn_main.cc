// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>
#include <string>
#include <vector>

#include "sgn/cli/commands.h"

int main(int argc, char **argv) {
  return sgn::cli::Run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
