#include "commands.hpp"

int main(int argc, char** argv) { return ddopt::cli::main_entry(argc, argv); }
