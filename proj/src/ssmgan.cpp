// Compiles the umbrella header on its own so missing includes surface at build time.
#include "ssmgan/ssmgan.hpp"
