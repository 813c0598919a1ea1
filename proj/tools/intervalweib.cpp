#include "intervalweib/commands.hpp"

int main(int argc, char** argv) { return intervalweib::run_cli(argc, argv); }
