#include "p3/cli.hpp"

int main(int argc, char** argv) { return p3::run(argc, argv); }
