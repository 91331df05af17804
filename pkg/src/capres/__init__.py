"""Resonances of 1-D semiclassical Schrodinger operators.

Three routes to the same spectral data: a complex absorbing potential
(CAP) added to a truncated Dirichlet operator, exterior complex scaling,
and an exact transfer-matrix oracle for piecewise-constant potentials.
The analysis layer cross-validates the routes against each other through
matching boxes, counting sandwiches and quasimode forcing.

Submodules are imported lazily so the command-line entry point can
configure threading before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = ("model", "operators", "spectra", "oracle", "analysis", "errors", "io", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f"capres.{name}")
    raise AttributeError(f"module 'capres' has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
