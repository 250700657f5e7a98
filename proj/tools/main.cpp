#include "cosserat/harness.hpp"

int main(int argc, char** argv) { return cosserat::cli_main(argc, argv); }
