#include "cli.hpp"

#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Keep large per-layer buffers on the heap instead of cycling mmap/munmap.
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
    return graphtv::cli::run(argc, argv, std::cout, std::cerr);
}
