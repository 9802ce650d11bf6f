#include "afmbo/evalcli.hpp"

int main(int argc, char** argv) { return afmbo::cli_main(argc, argv); }
