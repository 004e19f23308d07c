#include "malab/cli.hpp"

int main(int argc, char** argv) { return malab::cli::run(argc, argv); }
