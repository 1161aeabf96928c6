#include "glemiml/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return glemiml::cli::run(argc, argv, std::cout, std::cerr); }
