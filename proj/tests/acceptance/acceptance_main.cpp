#include "sparsewalk/sparsewalk.hpp"
int main(){return 0;}
