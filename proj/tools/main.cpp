#include "incsens/cli.hpp"

int main(int argc, char** argv) { return incsens::run_command(argc, argv); }
