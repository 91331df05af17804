import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from capres.errors import DomainTooSmallError, InvalidConfigurationError
from capres.model import PiecewisePotential, SemiclassicalModel, double_barrier_model, make_grid, single_well_model
from capres.operators import (
    CapProfile,
    ScalingProfile,
    _scaled_matrix,
    assemble_p_dirichlet,
    assemble_p_theta,
    assemble_q_cap,
    check_profile_derivative_bound,
    reflection_diagnostic,
    validate_cap,
    write_matrix_market,
)
from capres.spectra import eig_dense


def free_model(h, R0=1.0):
    pot = PiecewisePotential((-R0, R0), (0.0,))
    return SemiclassicalModel(h=h, potential=pot, R0=R0, R0prime=1.2 * R0, a0=0.5, b0=1.5)


def lowest_well_level(h, depth=1.0, a=1.0):
    """Independent oracle: lowest even bound state of the square well from the
    transcendental equation kin*tan(kin*a) = kout, kin = sqrt(E+depth)/h,
    kout = sqrt(-E)/h, bisected on the first branch kin*a in (0, pi/2)."""

    def f(E):
        kin = math.sqrt(E + depth) / h
        kout = math.sqrt(-E) / h
        return kin * math.tan(kin * a) - kout

    lo = -depth + 1e-12
    hi = -depth + (math.pi * h / (2 * a)) ** 2 - 1e-12
    assert f(lo) < 0 < f(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestDirichletAssembly:
    def test_free_3x3_spectrum(self):
        # discrete Dirichlet Laplacian on 3 nodes: 2(1 - cos(k pi/4))
        m = free_model(1.0)
        g = make_grid(2.0, 3)
        op = assemble_p_dirichlet(m, g)
        ev = np.sort(np.linalg.eigvalsh(op.matrix.real))
        assert_allclose(ev, [2 - math.sqrt(2), 2.0, 2 + math.sqrt(2)], atol=1e-14)

    def test_h_scaling_of_free_matrix(self):
        g = make_grid(2.0, 17)
        m1 = free_model(1.0)
        mh = free_model(0.3)
        A1 = assemble_p_dirichlet(m1, g).matrix
        Ah = assemble_p_dirichlet(mh, g).matrix
        assert_allclose(Ah, 0.09 * A1, rtol=0, atol=1e-18)

    def test_real_symmetric(self, bench_p_op):
        A = bench_p_op.matrix
        assert np.max(np.abs(A.imag)) == 0.0
        assert np.max(np.abs(A - A.T)) == 0.0

    def test_domain_too_small(self):
        m = double_barrier_model(0.1)
        with pytest.raises(DomainTooSmallError):
            assemble_p_dirichlet(m, make_grid(2.5, 99))

    def test_lowest_level_matches_well_oracle_at_dx2(self):
        # single well: the bottom eigenvalue is the bound state; errors shrink
        # at second order (Richardson ratio near 4)
        h = 0.1
        exact = lowest_well_level(h)
        errs = []
        for N in (599, 1199, 2399):
            m = single_well_model(h)
            op = assemble_p_dirichlet(m, make_grid(6.0, N))
            lo = np.linalg.eigvalsh(op.matrix.real)[0]
            errs.append(abs(lo - exact))
        assert errs[0] > errs[1] > errs[2]
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.2)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.2)

    def test_free_eigenvalue_convergence_rate(self):
        # lowest free mode tends to h^2 (pi/(2R))^2 at rate dx^2
        h, R = 1.0, 2.0
        exact = h * h * (math.pi / (2 * R)) ** 2
        errs = []
        for N in (99, 199, 399):
            op = assemble_p_dirichlet(free_model(h), make_grid(R, N))
            errs.append(abs(np.linalg.eigvalsh(op.matrix.real)[0] - exact))
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.2)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.2)

    def test_constant_shift_moves_spectrum_exactly(self):
        g = make_grid(2.0, 49)
        h, shift = 0.5, 0.7
        base = assemble_p_dirichlet(free_model(h), g)
        pot = PiecewisePotential((-g.R + g.dx / 2, g.R - g.dx / 2), (shift,))  # covers every node
        m2 = SemiclassicalModel(
            h=h, potential=pot, R0=g.R - g.dx / 2, R0prime=g.R - g.dx / 4, a0=0.5, b0=1.5
        )
        shifted = assemble_p_dirichlet(m2, g)
        ev1 = np.sort(np.linalg.eigvalsh(base.matrix.real)) + shift
        ev2 = np.sort(np.linalg.eigvalsh(shifted.matrix.real))
        assert_allclose(ev2, ev1, atol=1e-13)


class TestCapValidation:
    def test_benchmark_case_a(self):
        verdict = validate_cap(CapProfile(R1=3, R2=4, delta0=0.1), double_barrier_model(0.1))
        assert verdict.ok and verdict.regime == "caseA"

    def test_overlap_case_b(self):
        verdict = validate_cap(CapProfile(R1=2.2, R2=4, delta0=0.1), double_barrier_model(0.1))
        assert verdict.ok and verdict.regime == "caseB"

    def test_floor_violation(self):
        verdict = validate_cap(
            CapProfile(R1=3, R2=4, delta0=0.1, power=2, strength=0.001), double_barrier_model(0.1)
        )
        assert not verdict.ok
        assert any("floor condition" in v for v in verdict.violations)

    def test_imaginary_part_bound(self):
        verdict = validate_cap(
            CapProfile(R1=3, R2=4, delta0=0.1, imag_scale=2.0, imag_const=1.0),
            double_barrier_model(0.1),
        )
        assert not verdict.ok
        assert any("imaginary" in v.lower() for v in verdict.violations)


class TestCapAssembly:
    def test_zero_cap_equals_dirichlet(self, bench_model, bench_p_op):
        g = bench_p_op.grid
        cap = CapProfile(R1=3, R2=4, delta0=0.1, strength=0.0)
        q = assemble_q_cap(bench_model, g, cap)
        assert np.array_equal(q.matrix, bench_p_op.matrix)

    def test_spectrum_in_lower_half_plane(self, bench_model, bench_cap):
        g = make_grid(6.0, 199)
        q = assemble_q_cap(bench_model, g, bench_cap)
        ev = np.linalg.eigvals(q.matrix)
        assert ev.imag.max() <= 1e-10

    def test_anti_hermitian_part_is_absorber(self, bench_q_op, bench_cap):
        A = bench_q_op.matrix
        skew = (A - A.conj().T) / (-2j)
        expected = np.diag(bench_cap.re_w(bench_q_op.grid.nodes))
        assert np.max(np.abs(skew - expected)) <= 1e-14

    def test_imag_scale_enters_real_diagonal(self, bench_model):
        g = make_grid(6.0, 99)
        cap = CapProfile(R1=3, R2=4, delta0=0.1, imag_scale=0.5)
        q = assemble_q_cap(bench_model, g, cap)
        x = g.nodes
        p = assemble_p_dirichlet(bench_model, g)
        diff = q.matrix - p.matrix
        assert_allclose(np.diag(diff).real, cap.im_w(x), atol=1e-15)
        assert_allclose(np.diag(diff).imag, -cap.re_w(x), atol=1e-15)

    def test_domain_too_small(self, bench_model, bench_cap):
        with pytest.raises(DomainTooSmallError):
            assemble_q_cap(bench_model, make_grid(3.5, 99), bench_cap)


class TestScaledAssembly:
    def test_zero_angle_is_bitwise_dirichlet(self, bench_model, bench_p_op):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.0)
        op = assemble_p_theta(bench_model, bench_p_op.grid, s)
        assert np.array_equal(op.matrix, bench_p_op.matrix)

    def test_global_rotation_rotates_free_spectrum(self):
        # constant angle everywhere multiplies the free operator by e^{-2 i theta}
        theta0 = 0.2
        m = free_model(1.0)
        g = make_grid(2.0, 23)
        A = _scaled_matrix(m, g, lambda r: np.full_like(np.asarray(r, float), theta0), lambda r: np.zeros_like(np.asarray(r, float)))
        free = assemble_p_dirichlet(m, g).matrix
        ev = np.sort_complex(np.linalg.eigvals(A))
        expected = np.sort_complex(np.exp(-2j * theta0) * np.linalg.eigvalsh(free.real).astype(complex))
        assert_allclose(ev, expected, atol=1e-12)

    def test_preconditions(self, bench_model):
        with pytest.raises(InvalidConfigurationError):
            assemble_p_theta(bench_model, make_grid(6.0, 99), ScalingProfile(B=2.0, delta=1.0, theta0=0.2))
        with pytest.raises(InvalidConfigurationError):
            assemble_p_theta(bench_model, make_grid(4.0, 99), ScalingProfile(B=3.0, delta=1.5, theta0=0.2))


class TestReflectionDiagnostic:
    def test_zero_before_ramp(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2)
        assert reflection_diagnostic(s, 2.5) == 0.0

    def test_zero_on_plateau(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2)
        assert reflection_diagnostic(s, 3.6) == 0.0
        assert reflection_diagnostic(s, 10.0) == 0.0

    def test_exponential_derivatives_match_finite_differences(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2, k=2.0, shape="exponential")
        r0, eps = 3.5, 1e-6
        th = lambda r: float(np.asarray(s.theta(r)))
        fd1 = (th(r0 + eps) - th(r0 - eps)) / (2 * eps)
        assert float(np.asarray(s.theta_d1(r0))) == pytest.approx(fd1, rel=1e-6)
        eps2 = 1e-4
        fd2 = (th(r0 + eps2) - 2 * th(r0) + th(r0 - eps2)) / eps2**2
        assert float(np.asarray(s.theta_d2(r0))) == pytest.approx(fd2, rel=1e-6)

    def test_value_against_finite_difference_build(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2, k=2.0, shape="exponential")
        r0, eps = 3.5, 1e-6
        th = lambda r: float(np.asarray(s.theta(r)))
        d1 = (th(r0 + eps) - th(r0 - eps)) / (2 * eps)
        d2 = (th(r0 + 1e-4) - 2 * th(r0) + th(r0 - 1e-4)) / 1e-8
        expected = -1j * (r0 * d2 + d1) * np.exp(-1j * th(r0)) / (1 + 1j * r0 * d1) ** 3
        assert reflection_diagnostic(s, r0) == pytest.approx(expected, rel=1e-5)

    def test_smooth_step_midramp_nonzero(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2)
        assert abs(reflection_diagnostic(s, 3.25)) > 0


class TestProfileDerivativeBound:
    def test_benchmark_profile_passes(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2, k=2.0, shape="exponential")
        for h in (0.1, 0.05):
            rep = check_profile_derivative_bound(s, h, c_bound=10.0, eps=0.1, num_points=10_000)
            assert rep.passed and rep.max_violation <= 0.0

    def test_violation_tracks_additive_term(self):
        # inside (B, B+1/C] the profile derivatives are negligible, so the
        # margin is essentially the additive e^{-h^{-2/3+eps}} term
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2, k=2.0, shape="exponential")
        for h in (0.2, 0.1, 0.05):
            rep = check_profile_derivative_bound(s, h, c_bound=10.0, eps=0.1, num_points=5_000)
            term = np.exp(-(h ** (-2.0 / 3.0 + 0.1)))
            assert rep.passed
            assert rep.max_violation == pytest.approx(-term, rel=1e-3)

    def test_requires_exponential_shape(self):
        s = ScalingProfile(B=3.0, delta=1.0, theta0=0.2)
        with pytest.raises(InvalidConfigurationError):
            check_profile_derivative_bound(s, 0.1, 10.0, 0.1)


class TestMatrixMarket:
    def test_round_trip_entries(self, tmp_path):
        m = double_barrier_model(0.1)
        g = make_grid(6.0, 9)
        op = assemble_q_cap(m, g, CapProfile(R1=3, R2=4, delta0=0.1))
        path = tmp_path / "q.mtx"
        write_matrix_market(op, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "%%MatrixMarket matrix coordinate complex general"
        n, mcols, nnz = (int(t) for t in lines[2].split())
        assert (n, mcols) == (9, 9)
        A = np.zeros((n, n), dtype=complex)
        for line in lines[3:]:
            i, j, re, im = line.split()
            A[int(i) - 1, int(j) - 1] = float(re) + 1j * float(im)
        assert_allclose(A, op.matrix, atol=0)
