#include "sparsewalk/sparsewalk.hpp"
