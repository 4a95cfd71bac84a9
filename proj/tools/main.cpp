#include <cstdio>

int main() {
    std::puts("afa: subcommands not wired up yet");
    return 0;
}
