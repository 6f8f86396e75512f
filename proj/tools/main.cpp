#include "treecut/cli.hpp"

int main(int argc, char** argv) { return treecut::treecut_main(argc, argv); }
