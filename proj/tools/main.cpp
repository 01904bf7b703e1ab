#include "opl/cli.hpp"

int main(int argc, char** argv) { return opl::dispatch(argc, argv); }
