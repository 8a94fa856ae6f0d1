#include "distpose/cli.hpp"

int main(int argc, char** argv) { return distpose::cli::dispatch(argc, argv); }
