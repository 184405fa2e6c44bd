#include "reqc/cli.hpp"

int main(int argc, char** argv) { return reqc::main_entry(argc, argv); }
