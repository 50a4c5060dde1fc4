#include "afrda/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return afrda::cli::run(argc, argv, std::cout, std::cerr);
}
