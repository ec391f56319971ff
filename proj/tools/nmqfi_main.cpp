#include "nmqfi/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv) { return nmqfi::main_entry(argc, argv, std::cout, std::cerr); }
