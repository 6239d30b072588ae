#include "cli.hpp"

int main(int argc, char** argv) { return roadlabel::cli::run(argc, argv); }
