#include <cstdio>

int main()
{
    std::puts("microtrap: subcommands not wired up yet");
    return 1;
}
