#include "protobank/cli.hpp"

int main(int argc, char** argv) { return protobank::cli::dispatch(argc, argv); }
