#include <pybind11/pybind11.h>
PYBIND11_MODULE(_traitscale, m) { m.doc() = "traitscale core bindings"; }
