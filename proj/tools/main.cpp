#include <cstdio>

#include "sharpbench/version.hpp"

int main() {
    std::printf("sharpbench %s\n", sharpbench::kVersion);
    return 0;
}
