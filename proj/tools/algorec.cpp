#include "algorec/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return algorec::cli::dispatch(argc, argv, std::cout, std::cerr);
}
