#include <cstdio>
int main() { std::puts("specres cli placeholder"); return 0; }
