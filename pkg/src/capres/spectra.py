"""Dense non-Hermitian eigensolves, box filtering, clustering and contour counting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import ContourTouchesSpectrumError, NumericalFailureError, ResourceLimitError
from .operators import KIND_CAP, KIND_DIRICHLET, KIND_SCALED, DiscreteOperator

__all__ = [
    "Spectrum",
    "SpectralBox",
    "ClusterDecomposition",
    "ProjectorCount",
    "DENSE_BUDGET",
    "eig_dense",
    "filter_box",
    "cluster_boxes",
    "contour_projector_count",
    "min_singular_value",
]

DENSE_BUDGET = 4096

_METHOD_OF_KIND = {KIND_DIRICHLET: "dirichlet", KIND_CAP: "cap", KIND_SCALED: "scaled"}


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (sorted by Re, then Im) with optional unit right eigenvectors
    and per-pair residuals ||A v - z v||."""

    eigenvalues: np.ndarray
    method: str
    h: float
    eigenvectors: Optional[np.ndarray] = None  # column k belongs to eigenvalues[k]
    residuals: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.eigenvalues)

    def take(self, indices):
        idx = np.asarray(indices, dtype=int)
        return Spectrum(
            eigenvalues=self.eigenvalues[idx],
            method=self.method,
            h=self.h,
            eigenvectors=None if self.eigenvectors is None else self.eigenvectors[:, idx],
            residuals=None if self.residuals is None else self.residuals[idx],
        )


@dataclass(frozen=True)
class SpectralBox:
    """Closed rectangle [a, b] + i[-c, 0] hugging the real axis from below."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("box requires a < b")
        if not self.c > 0:
            raise ValueError("box depth c must be positive")

    def contains(self, z):
        z = np.asarray(z)
        return (
            (z.real >= self.a)
            & (z.real <= self.b)
            & (z.imag >= -self.c)
            & (z.imag <= 0.0)
        )

    @property
    def width(self):
        return self.b - self.a


@dataclass(frozen=True)
class ClusterDecomposition:
    boxes: tuple
    w: float
    c: float
    separation_flag: bool = False  # True when w had to be capped at this h


def eig_dense(A: DiscreteOperator, want_vectors: bool = False) -> Spectrum:
    """All eigenvalues of the dense operator, deterministically ordered.

    Matrices that are exactly Hermitian (bitwise) take the symmetric path and
    come back with exactly real eigenvalues; everything else goes through the
    general complex solver.
    """
    M = A.matrix
    n = M.shape[0]
    if n > DENSE_BUDGET:
        raise ResourceLimitError(f"matrix dimension {n} exceeds dense budget {DENSE_BUDGET}")
    hermitian = np.array_equal(M, M.conj().T)
    try:
        if hermitian:
            if want_vectors:
                ev, vec = la.eigh(M)
            else:
                ev, vec = la.eigvalsh(M), None
            ev = ev.astype(complex)
        else:
            if want_vectors:
                ev, vec = la.eig(M)
            else:
                ev, vec = la.eigvals(M), None
    except la.LinAlgError as exc:  # pragma: no cover - depends on LAPACK failure
        raise NumericalFailureError(f"dense eigensolver did not converge: {exc}") from exc
    order = np.lexsort((ev.imag, ev.real))
    ev = ev[order]
    residuals = None
    if vec is not None:
        vec = vec[:, order]
        vec = vec / np.linalg.norm(vec, axis=0, keepdims=True)
        residuals = np.linalg.norm(M @ vec - vec * ev[None, :], axis=0)
    return Spectrum(
        eigenvalues=ev,
        method=_METHOD_OF_KIND.get(A.kind, A.kind),
        h=A.h,
        eigenvectors=vec,
        residuals=residuals,
    )


def filter_box(s: Spectrum, box: SpectralBox) -> Spectrum:
    """Boundary-inclusive restriction of a spectrum to a box; len() of the result
    is the eigenvalue count N(box)."""
    keep = np.where(box.contains(s.eigenvalues))[0]
    return s.take(keep)


def cluster_boxes(points, c, h, nsharp=1, parent_width=None) -> ClusterDecomposition:
    """Greedy cluster decomposition of a point set into separated boxes.

    The separation parameter is w = h^{-(5 nsharp + 1)/2} c; points whose real
    parts are closer than 6w share a box, each box pads the extreme points by w
    in the real direction and spans i[-c, 0].  Resulting boxes are pairwise at
    least 4w apart.  When w would exceed an eighth of the parent window width
    (the point span when not given) it is capped and the decomposition is
    flagged: separation at that h is not achievable.
    """
    pts = np.sort_complex(np.asarray(points, dtype=complex))
    if len(pts) == 0:
        return ClusterDecomposition(boxes=(), w=0.0, c=float(c), separation_flag=False)
    w = h ** (-(5.0 * nsharp + 1.0) / 2.0) * c
    flag = False
    if parent_width is None:
        parent_width = float(pts.real.max() - pts.real.min()) if len(pts) > 1 else 0.0
    if parent_width > 0.0 and w > parent_width / 8.0:
        w = parent_width / 8.0
        flag = True
    boxes = []
    lo = hi = pts[0].real
    for p in pts[1:]:
        if p.real - hi < 6.0 * w:
            hi = p.real
        else:
            boxes.append(SpectralBox(lo - w, hi + w, c))
            lo = hi = p.real
    boxes.append(SpectralBox(lo - w, hi + w, c))
    return ClusterDecomposition(boxes=tuple(boxes), w=float(w), c=float(c), separation_flag=flag)


@dataclass(frozen=True)
class ProjectorCount:
    count: int
    trace_residual: float


def _gauss_nodes_on_rectangle(a, b, lo, hi, nodes_per_edge):
    """Gauss-Legendre nodes and complex weights along the rectangle boundary,
    oriented counterclockwise."""
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_edge)
    corners = [a + 1j * lo, b + 1j * lo, b + 1j * hi, a + 1j * hi, a + 1j * lo]
    zs, ws = [], []
    for c0, c1 in zip(corners[:-1], corners[1:]):
        mid, half = 0.5 * (c0 + c1), 0.5 * (c1 - c0)
        zs.append(mid + half * xg)
        ws.append(wg * half)
    return np.concatenate(zs), np.concatenate(ws)


def contour_projector_count(
    A: DiscreteOperator, box: SpectralBox, nodes_per_edge: int = 64, eigenvalues=None
) -> ProjectorCount:
    """Eigenvalue count in a box via the trace of the contour-integral projector.

    The integration rectangle is [a, b] + i[-c, +c]: the top edge is mirrored
    above the real axis so that eigenvalues sitting on (or a hair below) the
    axis are enclosed cleanly.  For operators whose spectrum stays in the
    closed lower half-plane this counts exactly the eigenvalues of the box.
    Quadrature is Gauss-Legendre per edge; one factorization of (zI - A) per
    node with the identity as right-hand side yields the resolvent trace.

    If `eigenvalues` is supplied, a margin precondition (no eigenvalue within
    one quadrature spacing of the contour) is enforced up front.
    """
    M = A.matrix
    n = M.shape[0]
    zs, ws = _gauss_nodes_on_rectangle(box.a, box.b, -box.c, box.c, nodes_per_edge)
    spacing = (2.0 * (box.b - box.a) + 4.0 * box.c) / (4.0 * nodes_per_edge)
    if eigenvalues is not None:
        dmin = _min_distance_to_rectangle(np.asarray(eigenvalues), box.a, box.b, -box.c, box.c)
        if dmin < spacing:
            raise ContourTouchesSpectrumError(
                f"eigenvalue within {dmin:.3e} of the contour (spacing {spacing:.3e})"
            )
    eye = np.eye(n, dtype=complex)
    total = 0.0 + 0.0j
    for z, w in zip(zs, ws):
        try:
            lu, piv = la.lu_factor(z * eye - M)
            inv = la.lu_solve((lu, piv), eye)
        except la.LinAlgError as exc:
            raise ContourTouchesSpectrumError(f"singular resolvent at contour node {z}") from exc
        tr = np.trace(inv)
        if not np.isfinite(tr) or abs(tr) > 1e14:
            raise ContourTouchesSpectrumError(f"resolvent blow-up at contour node {z}")
        total += w * tr
    trace = total / (2j * np.pi)
    count = int(np.round(trace.real))
    return ProjectorCount(count=count, trace_residual=float(abs(trace - count)))


def _min_distance_to_rectangle(zs, a, b, lo, hi):
    dre = np.maximum(np.maximum(a - zs.real, zs.real - b), 0.0)
    dim = np.maximum(np.maximum(lo - zs.imag, zs.imag - hi), 0.0)
    outside = np.hypot(dre, dim)
    inside = np.minimum(
        np.minimum(zs.real - a, b - zs.real), np.minimum(zs.imag - lo, hi - zs.imag)
    )
    d = np.where(outside > 0.0, outside, inside)
    return float(d.min()) if len(d) else np.inf


def min_singular_value(A: DiscreteOperator, z) -> float:
    """Smallest singular value of (A - z I); reciprocal of the resolvent norm."""
    M = A.matrix - complex(z) * np.eye(A.matrix.shape[0], dtype=complex)
    return float(la.svdvals(M)[-1])
