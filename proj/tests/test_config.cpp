#include <doctest.h>
#include "dkmc/config.hpp"
