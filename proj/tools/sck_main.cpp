#include "sck/cli/run.hpp"

int main(int argc, char** argv) { return sck::cli::main_entry(argc, argv); }
