"""Problem instances: potentials, grids, smooth cutoffs and the energy window.

Everything here is immutable after construction and safe to share across
threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "PiecewisePotential",
    "SemiclassicalModel",
    "Grid",
    "CutoffFunction",
    "Validation",
    "smooth_step",
    "smooth_step_d1",
    "smooth_step_d2",
    "make_grid",
    "make_cutoff",
    "validate_model",
    "double_barrier_model",
    "single_well_model",
]


def smooth_step(t):
    """C-infinity step s(t): 0 for t <= 0, 1 for t >= 1, and
    e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) in between.

    s(1/2) = 1/2 and all derivatives vanish at t = 0 and t = 1, so ramps
    built from it glue smoothly onto their plateaus.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return float(out[0]) if scalar else out


def smooth_step_d1(t):
    """First derivative of `smooth_step` (0 outside (0, 1))."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    ap = a / tm**2
    bp = -b / (1.0 - tm) ** 2
    out[mid] = (ap * b - a * bp) / (a + b) ** 2
    return float(out[0]) if scalar else out


def smooth_step_d2(t):
    """Second derivative of `smooth_step` (0 outside (0, 1))."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    s = 1.0 - tm
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / s)
    ap = a / tm**2
    bp = -b / s**2
    app = a * (1.0 / tm**4 - 2.0 / tm**3)
    bpp = b * (1.0 / s**4 - 2.0 / s**3)
    u = ap * b - a * bp
    v = (a + b) ** 2
    up = app * b - a * bpp
    vp = 2.0 * (a + b) * (ap + bp)
    out[mid] = (up * v - u * vp) / v**2
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class PiecewisePotential:
    """Piecewise-constant potential: values[i] on [breakpoints[i], breakpoints[i+1]),
    zero outside the breakpoint range.  Exact evaluation, no interpolation."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) < 2:
            raise ValueError("need at least two breakpoints")
        if any(b1 >= b2 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(vals) != len(bp) - 1:
            raise ValueError("need exactly one value per interval")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        ok = (idx >= 0) & (idx < len(self.values))
        out[ok] = np.asarray(self.values)[idx[ok]]
        return float(out[0]) if scalar else out

    def refine(self, point):
        """Insert a breakpoint without changing any value of the potential."""
        point = float(point)
        bp = self.breakpoints
        if point <= bp[0] or point >= bp[-1] or point in bp:
            raise ValueError("refinement point must lie strictly inside an interval")
        i = int(np.searchsorted(bp, point)) - 1
        new_bp = bp[: i + 1] + (point,) + bp[i + 1 :]
        new_vals = self.values[: i + 1] + (self.values[i],) + self.values[i + 1 :]
        return PiecewisePotential(new_bp, new_vals)

    @property
    def support_radius(self):
        return max(abs(self.breakpoints[0]), abs(self.breakpoints[-1]))


@dataclass(frozen=True)
class SemiclassicalModel:
    """The problem instance -h^2 u'' + V u on the line.

    h is the semiclassical parameter, V vanishes for |x| >= R0, the
    operator is free for |x| > R0prime, and resonances are sought near
    the energy window [a0, b0].  n_sharp is the counting exponent of the
    polynomial eigenvalue bounds (1 in one dimension).
    """

    h: float
    potential: PiecewisePotential
    R0: float
    R0prime: float
    a0: float
    b0: float
    nsharp: int = 1

    def to_dict(self):
        return {
            "h": self.h,
            "breakpoints": list(self.potential.breakpoints),
            "values": list(self.potential.values),
            "R0": self.R0,
            "R0prime": self.R0prime,
            "a0": self.a0,
            "b0": self.b0,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @staticmethod
    def from_dict(doc):
        return SemiclassicalModel(
            h=float(doc["h"]),
            potential=PiecewisePotential(tuple(doc["breakpoints"]), tuple(doc["values"])),
            R0=float(doc["R0"]),
            R0prime=float(doc["R0prime"]),
            a0=float(doc["a0"]),
            b0=float(doc["b0"]),
        )

    @staticmethod
    def from_json(text):
        return SemiclassicalModel.from_dict(json.loads(text))

    def with_h(self, h):
        return SemiclassicalModel(float(h), self.potential, self.R0, self.R0prime, self.a0, self.b0, self.nsharp)


@dataclass(frozen=True)
class Grid:
    """Uniform Dirichlet grid on (-R, R): N interior nodes, dx = 2R/(N+1)."""

    R: float
    N: int

    @property
    def dx(self):
        return 2.0 * self.R / (self.N + 1)

    @cached_property
    def nodes(self):
        return -self.R + self.dx * np.arange(1, self.N + 1)

    @cached_property
    def half_nodes(self):
        """Midpoints x_{j+1/2} for j = 0..N (walls to walls)."""
        return -self.R + self.dx * (np.arange(0, self.N + 1) + 0.5)


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth radial cutoff: 1 for |x| <= a, 0 for |x| >= b, smooth-step ramp between."""

    a: float
    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return smooth_step((self.b - np.abs(x)) / (self.b - self.a))


def make_grid(R, N):
    """Build a Dirichlet grid; R > 0 and N >= 3 required."""
    if not R > 0:
        raise ValueError("grid half-width R must be positive")
    N = int(N)
    if N < 3:
        raise ValueError("grid needs at least 3 interior nodes")
    return Grid(float(R), N)


def make_cutoff(a, b):
    """Smooth cutoff with plateau [-a, a] and support [-b, b]; 0 < a < b required."""
    if not 0 < a < b:
        raise ValueError("cutoff requires 0 < a < b")
    return CutoffFunction(float(a), float(b))


@dataclass(frozen=True)
class Validation:
    """Outcome of a structural validation: ok flag plus the list of violations."""

    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def validate_model(m: SemiclassicalModel) -> Validation:
    """Check the model invariants; violations are returned as data, never raised."""
    bad = []
    if not 0 < m.R0 <= m.R0prime:
        bad.append("radii must satisfy 0 < R0 <= R0prime")
    if not 0 < m.a0 < m.b0:
        bad.append("energy window must satisfy 0 < a0 < b0")
    if m.h <= 0:
        bad.append("semiclassical parameter h must be positive")
    if m.potential.support_radius > m.R0 + 1e-14:
        bad.append("support exceeds R0")
    if m.nsharp != 1:
        bad.append("counting exponent is fixed to 1 in one dimension")
    return Validation(ok=not bad, violations=tuple(bad))


def double_barrier_model(h, *, a0=0.5, b0=1.5):
    """The benchmark: V = 2 on 1 <= |x| <= 2, zero elsewhere.

    The well between the barriers traps energies below 2, producing
    resonances whose widths shrink exponentially as h decreases.
    """
    pot = PiecewisePotential((-2.0, -1.0, 1.0, 2.0), (2.0, 0.0, 2.0))
    return SemiclassicalModel(h=float(h), potential=pot, R0=2.0, R0prime=2.5, a0=a0, b0=b0)


def single_well_model(h, *, depth=1.0):
    """A square well V = -depth on |x| <= 1; its bound states have a classical
    transcendental characterization, handy as a second oracle."""
    pot = PiecewisePotential((-1.0, 1.0), (-float(depth),))
    return SemiclassicalModel(h=float(h), potential=pot, R0=1.0, R0prime=1.5, a0=0.5, b0=1.5)
