#include "starspec/cli.hpp"

int main(int argc, char** argv) { return starspec::cli::dispatch(argc, argv); }
