// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "overgen/app/cli.hpp"

int main(int argc, char** argv) {
    return overgen::app::cli_dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
