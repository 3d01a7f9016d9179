#include "savbdf/cli.hpp"

int main(int argc, char** argv) { return savbdf::cli::main(argc, argv); }
