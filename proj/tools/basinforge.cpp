#include "basinforge/cli.hpp"

int main(int argc, char** argv) { return basinforge::cli::dispatch(argc, argv); }
