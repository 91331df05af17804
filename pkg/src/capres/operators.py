"""Dense matrix realizations of the truncated, absorbing and complex-scaled operators.

All three assemblies share one tridiagonal kinetic builder, so the scaled
operator with zero angle reproduces the self-adjoint matrix bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainTooSmallError, InvalidConfigurationError
from .model import Grid, SemiclassicalModel, Validation, smooth_step, smooth_step_d1, smooth_step_d2

__all__ = [
    "CapProfile",
    "ScalingProfile",
    "DiscreteOperator",
    "CapValidation",
    "assemble_p_dirichlet",
    "assemble_q_cap",
    "assemble_p_theta",
    "validate_cap",
    "reflection_diagnostic",
    "check_profile_derivative_bound",
    "ProfileBoundReport",
    "write_matrix_market",
]

KIND_DIRICHLET = "dirichlet"
KIND_CAP = "cap"
KIND_SCALED = "scaled"


@dataclass(frozen=True)
class CapProfile:
    """Absorbing potential W with Re W = strength * max(|x| - R1, 0)^power and
    Im W = imag_scale * sqrt(Re W).

    Re W switches on at |x| = R1 and must reach the floor delta0 by |x| = R2;
    the imaginary part is admissible while imag_scale <= imag_const.
    """

    R1: float
    R2: float
    delta0: float
    power: int = 2
    strength: float = 1.0
    imag_scale: float = 0.0
    imag_const: float = 1.0

    def re_w(self, x):
        return self.strength * np.maximum(np.abs(x) - self.R1, 0.0) ** self.power

    def im_w(self, x):
        return self.imag_scale * np.sqrt(self.re_w(x))

    def __call__(self, x):
        return self.re_w(x) + 1j * self.im_w(x)

    def to_dict(self):
        return {
            "R1": self.R1,
            "R2": self.R2,
            "delta0": self.delta0,
            "power": self.power,
            "strength": self.strength,
            "imagScale": self.imag_scale,
            "imagConstC": self.imag_const,
        }

    @staticmethod
    def from_dict(doc):
        return CapProfile(
            R1=float(doc["R1"]),
            R2=float(doc["R2"]),
            delta0=float(doc["delta0"]),
            power=int(doc.get("power", 2)),
            strength=float(doc.get("strength", 1.0)),
            imag_scale=float(doc.get("imagScale", 0.0)),
            imag_const=float(doc.get("imagConstC", 1.0)),
        )


@dataclass(frozen=True)
class CapValidation(Validation):
    """Cap admissibility verdict plus the placement regime.

    regime "caseA" means the absorber starts in the free region
    (R0prime < R1); "caseB" means it overlaps the non-free region, which
    weakens the attainable error terms but is still admissible.
    """

    regime: str = "caseA"


def validate_cap(cap: CapProfile, m: SemiclassicalModel) -> CapValidation:
    """Check the absorbing-potential admissibility conditions; violations are data."""
    bad = []
    if not 0 < cap.R1 < cap.R2:
        bad.append("radii must satisfy 0 < R1 < R2")
    if cap.delta0 <= 0:
        bad.append("floor delta0 must be positive")
    if cap.strength < 0:
        bad.append("strength must be nonnegative")
    if cap.R1 <= m.R0:
        bad.append("absorber must vanish on the interaction region (R0 < R1)")
    if cap.strength * (cap.R2 - cap.R1) ** cap.power < cap.delta0:
        bad.append("floor condition fails: strength*(R2-R1)^power < delta0")
    if cap.imag_scale > cap.imag_const:
        bad.append("imaginary part exceeds its sqrt(Re W) bound")
    regime = "caseA" if m.R0prime < cap.R1 else "caseB"
    return CapValidation(ok=not bad, violations=tuple(bad), regime=regime)


@dataclass(frozen=True)
class ScalingProfile:
    """Radial scaling angle theta(r) used for exterior complex scaling.

    shape "smooth_step": theta = theta0 * s((r - B)/(delta/2)); exactly 0 for
    r <= B and exactly theta0 for r >= B + delta/2.
    shape "exponential": theta = theta0 * exp(-(r - B)^{-k}) for r > B; never
    attains theta0, used for the derivative-domination diagnostic only.
    """

    B: float
    delta: float
    theta0: float
    k: float = 2.0
    shape: str = "smooth_step"

    def __post_init__(self):
        if self.shape not in ("smooth_step", "exponential"):
            raise ValueError(f"unknown scaling shape {self.shape!r}")

    def theta(self, r):
        r = np.asarray(r, dtype=float)
        if self.shape == "smooth_step":
            return self.theta0 * smooth_step((r - self.B) / (self.delta / 2.0))
        u = np.maximum(r - self.B, 0.0)
        with np.errstate(divide="ignore", under="ignore"):
            out = np.where(u > 0.0, np.exp(-u ** (-self.k), where=u > 0.0, out=np.zeros_like(u)), 0.0)
        return self.theta0 * out

    def theta_d1(self, r):
        r = np.asarray(r, dtype=float)
        if self.shape == "smooth_step":
            half = self.delta / 2.0
            return self.theta0 * smooth_step_d1((r - self.B) / half) / half
        return self._exp_derivatives(r)[1]

    def theta_d2(self, r):
        r = np.asarray(r, dtype=float)
        if self.shape == "smooth_step":
            half = self.delta / 2.0
            return self.theta0 * smooth_step_d2((r - self.B) / half) / half**2
        return self._exp_derivatives(r)[2]

    def theta_d3(self, r):
        if self.shape != "exponential":
            raise InvalidConfigurationError("third derivative implemented for the exponential shape only")
        return self._exp_derivatives(np.asarray(r, dtype=float))[3]

    def _exp_derivatives(self, r):
        # theta = theta0 * e^psi with psi = -u^{-k}, u = r - B > 0; chain rule gives
        # d1 = psi1 e^psi, d2 = (psi2 + psi1^2) e^psi, d3 = (psi3 + 3 psi1 psi2 + psi1^3) e^psi.
        u = np.maximum(r - self.B, 0.0)
        pos = u > 0.0
        psi1 = np.zeros_like(u)
        psi2 = np.zeros_like(u)
        psi3 = np.zeros_like(u)
        phi = np.zeros_like(u)
        k = self.k
        with np.errstate(divide="ignore", under="ignore", over="ignore", invalid="ignore"):
            up = u[pos]
            psi1[pos] = k * up ** (-k - 1.0)
            psi2[pos] = -k * (k + 1.0) * up ** (-k - 2.0)
            psi3[pos] = k * (k + 1.0) * (k + 2.0) * up ** (-k - 3.0)
            phi[pos] = np.exp(-(up ** (-k)))
        th = self.theta0 * phi
        d1 = self.theta0 * psi1 * phi
        d2 = self.theta0 * (psi2 + psi1**2) * phi
        d3 = self.theta0 * (psi3 + 3.0 * psi1 * psi2 + psi1**3) * phi
        return th, d1, d2, d3

    def plateau_start(self):
        """Radius past which theta is exactly theta0 (smooth_step shape)."""
        return self.B + self.delta / 2.0

    def to_dict(self):
        return {"B": self.B, "delta": self.delta, "theta0": self.theta0, "k": self.k, "shape": self.shape}

    @staticmethod
    def from_dict(doc):
        return ScalingProfile(
            B=float(doc["B"]),
            delta=float(doc["delta"]),
            theta0=float(doc["theta0"]),
            k=float(doc.get("k", 2.0)),
            shape=str(doc.get("shape", "smooth_step")),
        )


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense complex matrix realization of one of the three operators on a grid."""

    matrix: np.ndarray
    grid: Grid
    kind: str
    h: float


def _assemble_tridiag(h, grid, V, inv_j_node, inv_j_half):
    """Tridiagonal -h^2 (1/J) d((1/J) du) + V with the centered half-node scheme.

    Row j couples u_{j +/- 1} through -t * invJ_node[j] * invJ_half[j +/- 1/2]
    with t = h^2/dx^2; Dirichlet walls are implicit (no ghost nodes, but the
    wall-side half-node factors still enter the diagonal).
    """
    N = grid.N
    t = h * h / (grid.dx * grid.dx)
    a_plus = t * inv_j_node * inv_j_half[1:]
    a_minus = t * inv_j_node * inv_j_half[:-1]
    A = np.zeros((N, N), dtype=complex)
    idx = np.arange(N)
    A[idx, idx] = a_plus + a_minus + V
    A[idx[:-1], idx[:-1] + 1] = -a_plus[:-1]
    A[idx[1:], idx[1:] - 1] = -a_minus[1:]
    return A


def assemble_p_dirichlet(m: SemiclassicalModel, g: Grid) -> DiscreteOperator:
    """Self-adjoint 3-point realization of -h^2 d^2/dx^2 + V with Dirichlet walls."""
    if g.R <= m.R0prime:
        raise DomainTooSmallError("grid must extend beyond the free-region radius R0prime")
    ones_n = np.ones(g.N, dtype=complex)
    ones_h = np.ones(g.N + 1, dtype=complex)
    A = _assemble_tridiag(m.h, g, m.potential(g.nodes).astype(complex), ones_n, ones_h)
    return DiscreteOperator(matrix=A, grid=g, kind=KIND_DIRICHLET, h=m.h)


def assemble_q_cap(m: SemiclassicalModel, g: Grid, cap: CapProfile) -> DiscreteOperator:
    """Absorbing operator: the Dirichlet matrix plus diag(Im W) - i diag(Re W)."""
    if g.R <= cap.R2:
        raise DomainTooSmallError("grid must contain the absorber floor region (R > R2)")
    base = assemble_p_dirichlet(m, g)
    x = g.nodes
    A = base.matrix + np.diag(cap.im_w(x)) - 1j * np.diag(cap.re_w(x))
    return DiscreteOperator(matrix=A, grid=g, kind=KIND_CAP, h=m.h)


def _scaled_matrix(m, g, theta_fn, theta_d1_fn):
    """Kinetic part with jacobian J(x) = e^{i theta(|x|)} (1 + i |x| theta'(|x|))."""

    def inv_j(xs):
        r = np.abs(xs)
        th = theta_fn(r)
        J = np.exp(1j * th) * (1.0 + 1j * r * theta_d1_fn(r))
        return 1.0 / J

    return _assemble_tridiag(
        m.h, g, m.potential(g.nodes).astype(complex), inv_j(g.nodes), inv_j(g.half_nodes)
    )


def assemble_p_theta(m: SemiclassicalModel, g: Grid, s: ScalingProfile) -> DiscreteOperator:
    """Exterior complex scaling x -> x e^{i theta(|x|)}, applied on both tails.

    Scaling must start in the free region (B > R0prime) so the potential is
    untouched, and the grid must contain the ramp.
    """
    if s.B <= m.R0prime:
        raise InvalidConfigurationError("scaling must start in the free region (B > R0prime)")
    if g.R <= s.B + s.delta:
        raise InvalidConfigurationError("grid must contain the scaling ramp (R > B + delta)")
    A = _scaled_matrix(m, g, s.theta, s.theta_d1)
    return DiscreteOperator(matrix=A, grid=g, kind=KIND_SCALED, h=m.h)


def reflection_diagnostic(s: ScalingProfile, r) -> complex:
    """Scaling-induced reflection coefficient

        g(r) = -i (r theta'' + theta') e^{-i theta} / (1 + i r theta')^3,

    identically zero wherever the angle is flat (before the ramp, and on the
    plateau of the smooth-step shape)."""
    r = float(r)
    if r <= 0:
        raise ValueError("r must be positive")
    th = float(np.asarray(s.theta(r)))
    d1 = float(np.asarray(s.theta_d1(r)))
    d2 = float(np.asarray(s.theta_d2(r)))
    return complex(-1j * (r * d2 + d1) * np.exp(-1j * th) / (1.0 + 1j * r * d1) ** 3)


@dataclass(frozen=True)
class ProfileBoundReport:
    max_violation: float
    passed: bool
    argmax_r: float


def check_profile_derivative_bound(
    s: ScalingProfile, h, c_bound, eps, num_points=100_000
) -> ProfileBoundReport:
    """Verify that the exponential profile's derivatives are dominated by the
    profile itself at semiclassical scale:

        theta' + |theta''| + |theta'''| <= h^{-2} theta / c_bound + e^{-h^{-2/3+eps}}

    evaluated on a fine grid of r in (B, B + 1/c_bound]."""
    if s.shape != "exponential":
        raise InvalidConfigurationError("the derivative bound applies to the exponential shape")
    r = s.B + np.linspace(0.0, 1.0 / c_bound, num_points + 1)[1:]
    th, d1, d2, d3 = s._exp_derivatives(r)
    lhs = d1 + np.abs(d2) + np.abs(d3)
    rhs = th * h ** (-2.0) / c_bound + np.exp(-(h ** (-2.0 / 3.0 + eps)))
    L = lhs - rhs
    j = int(np.argmax(L))
    return ProfileBoundReport(max_violation=float(L[j]), passed=bool(L[j] <= 0.0), argmax_r=float(r[j]))


def write_matrix_market(op: DiscreteOperator, path):
    """Export the operator in matrix-market coordinate complex general format."""
    A = op.matrix
    rows, cols = np.nonzero(A)
    lines = [
        "%%MatrixMarket matrix coordinate complex general",
        f"% kind={op.kind} h={op.h:.17g} R={op.grid.R:.17g} N={op.grid.N}",
        f"{A.shape[0]} {A.shape[1]} {len(rows)}",
    ]
    for i, j in zip(rows, cols):
        v = A[i, j]
        lines.append(f"{i + 1} {j + 1} {v.real:.17g} {v.imag:.17g}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
