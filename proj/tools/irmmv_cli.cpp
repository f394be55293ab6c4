#include "irmmv/irmmv.hpp"
int main() { return 0; }
