"""Exact resonance oracle for piecewise-constant potentials.

Resonances are the second-sheet zeros of an outgoing-coupling determinant
D(z) assembled from 2x2 transfer matrices.  Everything here is
discretization-free: the only error sources are floating point and the
stopping tolerances of the root refinement, which makes this module the
ground truth the matrix methods are judged against.

Branch handling: the outgoing wavenumber is k(z) = sqrt(z)/h with the
principal square root, whose cut lies on the negative real axis.  For
Im z > 0 this is the physical sheet; continuing downward through the
positive real axis lands on the second sheet, where resonances live.  The
interior interval propagators are even functions of the local wavenumber,
hence entire in z, so the cut of D is exactly the cut of k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchAmbiguityError, NoConvergenceError, RefineContourError
from .model import SemiclassicalModel
from .spectra import SpectralBox

__all__ = [
    "OracleResonance",
    "transfer_determinant",
    "argument_count",
    "newton_refine",
    "find_resonances",
    "determinant_scale",
]


@dataclass(frozen=True)
class OracleResonance:
    z: complex
    determinant_residual: float
    winding_verified: bool
    multiplicity: int = 1
    degenerate: bool = False


def _interval_step(u, up, kap, L):
    """Propagate (u, u') across a constant-potential interval of length L with
    u'' = -kap^2 u.  The matrix entries cos(kap L), sin(kap L)/kap and
    kap sin(kap L) are even in kap, so the local branch choice cancels."""
    w = kap * L
    c = np.cos(w)
    if abs(w) < 1e-6:
        w2 = w * w
        s_over = L * (1.0 - w2 / 6.0 + w2 * w2 / 120.0)
    else:
        s_over = np.sin(w) / kap
    return c * u + s_over * up, -kap * np.sin(w) * u + c * up


def transfer_determinant(m: SemiclassicalModel, z, sheet: str = "auto", reflected: bool = False) -> complex:
    """Outgoing-coupling determinant D(z); zeros on the continuation are the
    resonances of the model, with D identically 1 for the free Hamiltonian.

    sheet="auto" uses the principal branch (physical for Im z > 0, second
    sheet for Im z < 0) and refuses real negative z, where the branch is
    ambiguous.  sheet="physical" resolves real negative z from above, which
    turns bound states into real zeros of D.  reflected=True flips the
    asymptotic wavenumber (k -> -k); since D is a real-coefficient function
    of (ik, z), real potentials satisfy conj(D(z)) = D_reflected(conj z).
    """
    z = complex(z)
    if z == 0:
        raise BranchAmbiguityError("z = 0 is the branch point of the outgoing wavenumber")
    if z.real < 0 and z.imag == 0.0:
        if sheet != "physical":
            raise BranchAmbiguityError(
                "real negative z lies on the branch cut; pass sheet='physical' to resolve from above"
            )
        z = complex(z.real, 0.0)  # +0.0 selects the upper side of the cut
    k = np.sqrt(complex(z)) / m.h
    if reflected:
        k = -k
    breaks = m.potential.breakpoints
    xl, xr = breaks[0], breaks[-1]
    u = np.exp(-1j * k * xl)
    up = -1j * k * u
    for i, v in enumerate(m.potential.values):
        kap = np.sqrt(complex(z - v)) / m.h
        u, up = _interval_step(u, up, kap, breaks[i + 1] - breaks[i])
    # amplitude of the incoming wave e^{-ikx} at the right edge, normalized so
    # that V = 0 gives exactly 1; resonances are its zeros
    return complex((1j * k * u - up) * np.exp(1j * k * xr) / (2j * k))


def determinant_scale(m: SemiclassicalModel, z, step=None) -> float:
    """Local magnitude scale of D near z: |D'(z)| (1 + |z|) + |D(z)|.

    Residuals of refined roots are judged against this, since the ambient
    size of D varies over many orders of magnitude with h."""
    z = complex(z)
    if step is None:
        step = 1e-7 * (1.0 + abs(z))
    d_plus = transfer_determinant(m, z + step)
    d_minus = transfer_determinant(m, z - step)
    dprime = (d_plus - d_minus) / (2.0 * step)
    return float(abs(dprime) * (1.0 + abs(z)) + abs(transfer_determinant(m, z)))


def _arg_increment(f, za, zb, va, vb, depth):
    d = np.angle(vb) - np.angle(va)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    if abs(d) <= np.pi / 2.0:
        return d
    if depth <= 0:
        raise RefineContourError("argument tracking exhausted; a zero lies on or next to the contour")
    zm = 0.5 * (za + zb)
    vm = f(zm)
    return _arg_increment(f, za, zm, va, vm, depth - 1) + _arg_increment(f, zm, zb, vm, vb, depth - 1)


def _winding_rectangle(f, a, b, lo, hi, nodes_per_edge, max_depth=48):
    """Winding number of f around the rectangle [a,b] x i[lo,hi], accumulating
    argument increments with adaptive bisection so zeros exponentially close
    to an edge are still resolved."""
    corners = [a + 1j * lo, b + 1j * lo, b + 1j * hi, a + 1j * hi, a + 1j * lo]
    pts = []
    for c0, c1 in zip(corners[:-1], corners[1:]):
        t = np.linspace(0.0, 1.0, nodes_per_edge + 1)[:-1]
        pts.extend(c0 + (c1 - c0) * t)
    pts.append(corners[0])
    total = 0.0
    va = f(pts[0])
    for za, zb in zip(pts[:-1], pts[1:]):
        vb = f(zb)
        total += _arg_increment(f, za, zb, va, vb, max_depth)
        va = vb
    return total / (2.0 * np.pi)


def argument_count(m: SemiclassicalModel, box: SpectralBox, nodes_per_edge: int = 64, lift=None) -> int:
    """Number of resonances in the box, with multiplicity, by the argument principle.

    The contour is the box rectangle with its top edge raised to +lift above
    the real axis: D has no zeros in the upper half-plane (they would be
    complex eigenvalues of a self-adjoint operator), so the lift encloses
    zeros hugging the axis without changing the count.
    """
    if lift is None:
        lift = 0.25 * box.width
    f = lambda z: transfer_determinant(m, z)
    w = _winding_rectangle(f, box.a, box.b, -box.c, lift, nodes_per_edge)
    n = int(np.round(w))
    if abs(w - n) > 1e-6:
        raise RefineContourError(f"non-integer winding {w:.6f}; contour too close to a zero")
    return n


def newton_refine(m: SemiclassicalModel, z0, tol=1e-13, max_iter=50, verify=True) -> OracleResonance:
    """Refine a simple zero of D by complex Newton with central-difference derivative.

    Terminates when the step drops below tol*(1+|z|); a tiny-rectangle winding
    check afterwards certifies the root (winding_verified)."""
    z = complex(z0)
    iterates = [z]
    for _ in range(max_iter):
        step = 1e-7 * (1.0 + abs(z))
        d = transfer_determinant(m, z)
        dprime = (transfer_determinant(m, z + step) - transfer_determinant(m, z - step)) / (2.0 * step)
        if dprime == 0 or not np.isfinite(dprime) or not np.isfinite(d):
            raise NoConvergenceError("degenerate derivative during refinement", iterates)
        dz = -d / dprime
        z = z + dz
        iterates.append(z)
        if not np.isfinite(z):
            raise NoConvergenceError("iteration left the finite plane", iterates)
        if abs(dz) <= tol * (1.0 + abs(z)):
            break
    else:
        raise NoConvergenceError("no convergence within the iteration budget", iterates)
    residual = abs(transfer_determinant(m, z))
    verified = False
    if verify:
        r = max(1e-6 * (1.0 + abs(z)), 10.0 * abs(dz))
        f = lambda zz: transfer_determinant(m, zz)
        w = _winding_rectangle(f, z.real - r, z.real + r, z.imag - r, z.imag + r, 16)
        verified = int(np.round(w)) == 1
    return OracleResonance(z=z, determinant_residual=residual, winding_verified=verified)


def find_resonances(
    m: SemiclassicalModel,
    box: SpectralBox,
    nodes_per_edge: int = 64,
    re_tol: float = 2e-2,
    lift=None,
) -> list:
    """All resonances in the box: recursive vertical-strip subdivision driven by
    the argument principle, then Newton refinement of isolated zeros.

    Strips keep the full imaginary range, so zeros stacked exponentially close
    to the real axis are separated by their real parts.  A strip that cannot
    be split below re_tol while holding more than one zero is reported once,
    unrefined, with the winding as multiplicity and a degeneracy flag.
    """
    if lift is None:
        lift = 0.25 * box.width
    f = lambda z: transfer_determinant(m, z)
    found = []

    def count_strip(a, b):
        for shift in (0.0, 0.013, -0.029):
            try:
                w = _winding_rectangle(
                    f, a + shift * (b - a), b + shift * (b - a), -box.c, lift, nodes_per_edge
                )
                n = int(np.round(w))
                if abs(w - n) <= 1e-6:
                    return n
            except RefineContourError:
                continue
        raise RefineContourError(f"could not isolate zeros in strip [{a}, {b}]")

    def recurse(a, b, n=None):
        if n is None:
            n = count_strip(a, b)
        if n == 0:
            return
        if n == 1 and (b - a) <= re_tol:
            res = newton_refine(m, 0.5 * (a + b) + 0.0j)
            found.append(res)
            return
        if n > 1 and (b - a) <= 1e-10 * (1.0 + abs(a)):
            z = 0.5 * (a + b) - 0.5j * box.c
            found.append(
                OracleResonance(
                    z=z,
                    determinant_residual=abs(transfer_determinant(m, z)),
                    winding_verified=False,
                    multiplicity=n,
                    degenerate=True,
                )
            )
            return
        mid = 0.5 * (a + b)
        # splitting exactly on a zero's real part raises; jiggle the cut
        for frac in (0.5, 0.5 + 0.037, 0.5 - 0.053):
            cut = a + frac * (b - a)
            try:
                nl = count_strip(a, cut)
                break
            except RefineContourError:
                continue
        else:
            raise RefineContourError(f"could not split strip [{a}, {b}]")
        recurse(a, cut, nl)
        recurse(cut, b, n - nl)

    recurse(box.a, box.b)
    return sorted(found, key=lambda r: (r.z.real, r.z.imag))
