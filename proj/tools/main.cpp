#include <cstdio>
int main() { std::puts("graphpde cli placeholder"); return 0; }
