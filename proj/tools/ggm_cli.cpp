#include "ggm/ggm.hpp"
int main() { return 0; }
