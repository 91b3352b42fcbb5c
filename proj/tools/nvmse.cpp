#include "nvmse/bench.hpp"

#include <iostream>

int main(int argc, char** argv)
{
   return nvmse::run_cli(argc, argv, std::cout, std::cerr);
}
