#include <pybind11/pybind11.h>
PYBIND11_MODULE(_dkmc, m) { m.doc() = "placeholder"; }
