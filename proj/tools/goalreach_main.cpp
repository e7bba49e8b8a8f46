#include <cstdio>
int main() { std::puts("goalreach cli: not wired up yet"); return 1; }
