#include "cli.hpp"

int main(int argc, char** argv) { return attnlab::cli::run(argc, argv); }
