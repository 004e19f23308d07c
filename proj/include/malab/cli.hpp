#pragma once

// placeholder; full command-line front end arrives with the lab modules
#include <cstdio>

namespace malab::cli {

inline int run(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::puts("ma-lab: not yet wired");
    return 2;
}

}  // namespace malab::cli
