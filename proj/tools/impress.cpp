#include "impress/cli.hpp"

int main(int argc, char** argv) { return impress::cli::run(argc, argv); }
