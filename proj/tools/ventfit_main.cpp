#include <cstdio>
int main() { std::puts("ventfit: under construction"); return 0; }
