#include <doctest.h>
#include "dkmc/pricer.hpp"
