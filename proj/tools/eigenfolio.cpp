#include "eigenfolio/cli.hpp"

int main(int argc, char** argv) { return eigenfolio::cli::run(argc, argv); }
