"""Acceptance suite: ten gate criteria, each at its stated tolerance.

Every test prints one `[ k/10] name: PASS/FAIL` line (run pytest with -s to
see them live).  Budgets are wall-clock seconds and are asserted too; they
are sized with ample slack for an ordinary workstation.
"""
import math
import time

import numpy as np
import pytest

import capres.spectra as spectra_mod
from capres import analysis
from capres.model import make_grid
from capres.operators import ScalingProfile, assemble_p_theta, assemble_q_cap, check_profile_derivative_bound
from capres.oracle import argument_count, determinant_scale, find_resonances
from capres.spectra import SpectralBox, contour_projector_count, eig_dense, filter_box, min_singular_value


class Budget:
    def __init__(self, seconds):
        self.limit = seconds
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def report(self, index, name, ok, detail):
        line = f"[{index:2d}/10] {name}: {'PASS' if ok else 'FAIL'} ({detail}, {self.elapsed:.1f}s <= {self.limit}s)"
        print(line)
        assert ok, line
        assert self.elapsed <= self.limit, line


def test_01_absorption_identity(bench_q_op, bench_q_spectrum, bench_cap):
    budget = Budget(30)
    residuals = analysis.absorption_identity_check(bench_q_op, bench_q_spectrum, bench_cap)
    worst = float(residuals.max())
    assert len(residuals) == 599
    budget.report(1, "absorption identity", worst <= 1e-10, f"max residual {worst:.2e}")


def test_02_resolvent_bound(bench_q_op, bench_model):
    budget = Budget(20)
    rng = np.random.default_rng(42)
    n = 20
    zs = bench_model.a0 + (bench_model.b0 - bench_model.a0) * rng.random(n) + 1j * (1.0 - rng.random(n))
    margins = analysis.resolvent_bound_check(bench_q_op, zs)
    slack = margins + 1e-12 * (1.0 + np.abs(zs))
    ok = bool(np.all(slack >= 0.0))
    budget.report(2, "resolvent bound", ok, f"min margin {float(margins.min()):.2e} over {n} samples")


def test_03_oracle_self_consistency(bench_model, bench_oracle, bench_window):
    budget = Budget(10)
    count = argument_count(bench_model, bench_window)
    refined = sum(r.multiplicity for r in bench_oracle)
    residuals_ok = all(
        r.determinant_residual <= 1e-10 * determinant_scale(bench_model, r.z) for r in bench_oracle
    )
    ok = count == refined and residuals_ok
    budget.report(3, "oracle self-consistency", ok, f"count {count} == refined {refined}")


def test_04_cap_matches_oracle_across_sweep(bench_model, bench_cap):
    budget = Budget(300)
    grid = make_grid(6.0, 2399)
    window = SpectralBox(0.5, 1.5, 0.1)
    ks, c2s = {}, {}
    for h in (0.1, 0.07, 0.05):
        model = bench_model.with_h(h)
        roots = np.array([r.z for r in find_resonances(model, window)])
        spec = eig_dense(assemble_q_cap(model, grid, bench_cap))
        floor = grid.dx**2 / h**2
        # forward: every resonance has a nearby absorbing eigenvalue
        k_h = 0.0
        for z in roots:
            w = spec.eigenvalues[np.argmin(np.abs(spec.eigenvalues - z))]
            k_h = max(k_h, abs(w - z) / (math.sqrt(max(-z.imag, 0.0)) + floor))
        ks[h] = k_h
        # reverse: every eligible absorbing eigenvalue sits in a resonance box;
        # the width term carries a dx^2 floor so the fit measures the width
        # scaling, not the grid, once true widths collapse below resolution
        params = analysis.MatchParams(
            a0=0.5, b0=1.5, eligibility_c=10.0, B=3.0, disc_floor=grid.dx**2
        )
        rep = analysis.match_spectra(spec, roots, "cap_to_resonance", h, params)
        assert rep.parameters["n_eligible"] == len(roots)
        assert all(p.box_satisfied for p in rep.pairs if p.eligible)
        c2s[h] = rep.fitted_c2
    k_ratio = max(ks.values()) / min(ks.values())
    c2_ratio = max(c2s.values()) / min(c2s.values())
    ok = k_ratio <= 3.0 and c2_ratio <= 3.0
    budget.report(
        4,
        "cap-resonance matching sweep",
        ok,
        f"K={[f'{ks[h]:.3f}' for h in sorted(ks)]} ratio {k_ratio:.2f}; "
        f"C2={[f'{c2s[h]:.2e}' for h in sorted(c2s)]} ratio {c2_ratio:.2f}",
    )


def test_05_complex_scaling_matches_oracle(bench_model, bench_oracle):
    budget = Budget(120)
    profile = ScalingProfile(B=3.0, delta=1.0, theta0=0.2)
    z_oracle = bench_oracle[0].z
    nearest = []
    for n in (599, 1199, 2399):
        spec = eig_dense(assemble_p_theta(bench_model, make_grid(6.0, n), profile))
        nearest.append(spec.eigenvalues[np.argmin(np.abs(spec.eigenvalues - z_oracle))])
    ratio = abs(nearest[0] - nearest[1]) / abs(nearest[1] - nearest[2])
    extrapolated = nearest[2] + (nearest[2] - nearest[1]) / 3.0
    dist = abs(extrapolated - z_oracle)
    ok = 3.5 <= ratio <= 4.5 and dist <= 1e-6
    budget.report(
        5, "complex scaling vs oracle", ok, f"Richardson ratio {ratio:.3f}, extrapolated dist {dist:.2e}"
    )


def test_06_counting_sandwich(bench_model, bench_grid, bench_cap, bench_q_spectrum):
    budget = Budget(60)
    h = 0.1
    window = SpectralBox(0.6, 1.0, h**4)
    fitted = None
    for n_exp in (0.0, 0.5, 1.0, 1.5, 2.0):
        rep = analysis.counting_sandwich(
            bench_model, bench_grid, bench_cap, None, window, n_exp, h, cap_spectrum=bench_q_spectrum
        )
        if rep.parameters["lower_ok"] and rep.parameters["upper_ok"]:
            fitted = n_exp
            break
    ok = fitted is not None
    p = rep.parameters
    budget.report(
        6,
        "counting sandwich",
        ok,
        f"n_exp {fitted}: {p['n_cap_inner']} <= {p['n_resonances']} <= {p['n_cap_outer']}",
    )


def test_07_contour_projector_counts(bench_q_op, bench_q_spectrum, bench_window):
    budget = Budget(30)
    rng = np.random.default_rng(7)
    M = (rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))) / np.sqrt(50)
    top = np.linalg.eigvals(M).imag.max()
    M = M - 1j * (top + 0.05) * np.eye(50)
    from capres.operators import DiscreteOperator

    op = DiscreteOperator(matrix=M, grid=make_grid(1.0, 50), kind="cap", h=0.1)
    spec = eig_dense(op)
    done, all_ok = 0, True
    while done < 10:
        a = rng.uniform(-2.0, 1.0)
        b = a + rng.uniform(0.3, 1.5)
        c = rng.uniform(0.2, 1.2)
        spacing = (2 * (b - a) + 4 * c) / (4 * 64)
        if spectra_mod._min_distance_to_rectangle(spec.eigenvalues, a, b, -c, c) < 2 * spacing:
            continue
        box = SpectralBox(a, b, c)
        out = contour_projector_count(op, box, 64)
        all_ok &= out.count == len(filter_box(spec, box))
        done += 1
    bench_out = contour_projector_count(bench_q_op, bench_window, 64)
    bench_expected = len(filter_box(bench_q_spectrum, bench_window))
    ok = all_ok and bench_out.count == bench_expected
    budget.report(
        7,
        "contour projector counts",
        ok,
        f"10 seeded boxes exact; benchmark {bench_out.count} == {bench_expected} "
        f"(trace residual {bench_out.trace_residual:.1e})",
    )


def test_08_profile_derivative_bound():
    budget = Budget(5)
    profile = ScalingProfile(B=3.0, delta=1.0, theta0=0.2, k=2.0, shape="exponential")
    worst = -np.inf
    ok = True
    for h in (0.1, 0.05):
        rep = check_profile_derivative_bound(profile, h, c_bound=10.0, eps=0.1, num_points=100_000)
        ok &= rep.passed
        worst = max(worst, rep.max_violation)
    budget.report(8, "scaling profile derivative bound", ok, f"max violation {worst:.2e}")


def test_09_domain_truncation_stability(bench_model, bench_cap, bench_q_spectrum, bench_window):
    budget = Budget(120)
    inside_6 = filter_box(bench_q_spectrum, bench_window).eigenvalues
    spec_8 = eig_dense(assemble_q_cap(bench_model, make_grid(8.0, 799), bench_cap))
    inside_8 = filter_box(spec_8, bench_window).eigenvalues
    moves = [min(abs(z - w) for w in inside_8) for z in inside_6]
    ok = len(inside_6) == len(inside_8) and max(moves) <= 1e-8
    budget.report(
        9,
        "domain truncation stability",
        ok,
        f"{len(inside_6)} eigenvalues, max move {max(moves):.2e} for R 6 -> 8",
    )


def test_10_quasimode_forcing(bench_model, bench_cap):
    budget = Budget(60)
    h = 0.05
    model = bench_model.with_h(h)
    grid = make_grid(6.0, 1199)
    well = analysis.dirichlet_well_quasimode(model, grid, 0.62)
    qs = analysis.QuasimodeSet.from_quasimodes([well], independence_n=0, independence_m=2.0)
    spec = eig_dense(assemble_q_cap(model, grid, bench_cap))
    rep = analysis.quasimode_implies_spectrum(qs, spec, h)
    ok = rep.verdict and rep.regime_ok and rep.gram_sigma_min >= rep.gram_threshold
    budget.report(
        10,
        "quasimode forcing",
        ok,
        f"E={well.energy:.6f}, residual {well.residual:.1e}, box depth {rep.c_value:.1e}, "
        f"count {rep.count_in_box} >= 1, fitted C0 {rep.fitted_c0:.1e}",
    )
