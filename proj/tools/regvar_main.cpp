#include "regvar/cli.hpp"

int main(int argc, char** argv) { return regvar::cli_main({argv + 1, argv + argc}); }
