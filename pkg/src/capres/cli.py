"""Command-line driver: config ingestion, experiment orchestration, reports.

Exit codes: 0 all requested hard checks pass, 1 a hard check failed,
2 configuration problems, 3 numerical failure (stage named on stderr).
Heavy imports happen inside functions so --threads can pin the BLAS pool
before numpy loads.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

KNOWN_CHECKS = (
    "absorption_identity",
    "resolvent_bound",
    "oracle_consistency",
    "matching",
    "counting",
    "quasimode_forcing",
)
SOFT_CHECKS = {"matching"}

_SCHEMA_VERSION = 1
_TOP_KEYS = {"schema", "model", "cap", "scaling", "grid", "sweep", "windows", "checks", "output"}
_MODEL_KEYS = {"h", "breakpoints", "values", "R0", "R0prime", "a0", "b0"}
_CAP_KEYS = {"R1", "R2", "delta0", "power", "strength", "imagScale", "imagConstC"}
_SCALING_KEYS = {"B", "delta", "theta0", "k", "shape"}
_GRID_KEYS = {"R", "N"}
_WINDOW_KEYS = {"a", "b", "c"}
_OUTPUT_KEYS = {"directory", "formats"}


class _ConfigProblem(Exception):
    pass


def _require_keys(doc, allowed, where):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise _ConfigProblem(f"{where}: unknown keys {unknown}")


def load_config(path):
    """Parse and validate a run configuration; raises _ConfigProblem with a
    line-anchored or key-anchored diagnostic."""
    from capres.model import SemiclassicalModel, make_grid, validate_model
    from capres.operators import CapProfile, ScalingProfile
    from capres.spectra import SpectralBox

    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise _ConfigProblem(f"cannot read config: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise _ConfigProblem(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise _ConfigProblem("config must be a JSON object")
    _require_keys(doc, _TOP_KEYS, "config")
    if doc.get("schema") != _SCHEMA_VERSION:
        raise _ConfigProblem(f"config.schema must be {_SCHEMA_VERSION}")
    for key in ("model", "grid"):
        if key not in doc:
            raise _ConfigProblem(f"config.{key} is required")
    _require_keys(doc["model"], _MODEL_KEYS, "config.model")
    model = SemiclassicalModel.from_dict(doc["model"])
    verdict = validate_model(model)
    if not verdict.ok:
        raise _ConfigProblem("config.model: " + "; ".join(verdict.violations))
    _require_keys(doc["grid"], _GRID_KEYS, "config.grid")
    grid = make_grid(float(doc["grid"]["R"]), int(doc["grid"]["N"]))
    cap = None
    if "cap" in doc:
        _require_keys(doc["cap"], _CAP_KEYS, "config.cap")
        cap = CapProfile.from_dict(doc["cap"])
    scaling = None
    if "scaling" in doc:
        _require_keys(doc["scaling"], _SCALING_KEYS, "config.scaling")
        scaling = ScalingProfile.from_dict(doc["scaling"])
    sweep = [float(h) for h in doc.get("sweep", [])]
    if sweep:
        if any(h <= 0 for h in sweep):
            raise _ConfigProblem("config.sweep: values must be positive")
        if len(set(sweep)) != len(sweep):
            raise _ConfigProblem("config.sweep: values must be distinct")
    windows = []
    for i, wdoc in enumerate(doc.get("windows", [])):
        _require_keys(wdoc, _WINDOW_KEYS, f"config.windows[{i}]")
        windows.append(SpectralBox(float(wdoc["a"]), float(wdoc["b"]), float(wdoc["c"])))
    checks = list(doc.get("checks", []))
    for name in checks:
        if name not in KNOWN_CHECKS:
            raise _ConfigProblem(f"config.checks: unknown check {name!r} (known: {', '.join(KNOWN_CHECKS)})")
    out_doc = doc.get("output", {})
    _require_keys(out_doc, _OUTPUT_KEYS, "config.output")
    formats = list(out_doc.get("formats", ["csv", "json"]))
    bad = sorted(set(formats) - {"csv", "json"})
    if bad:
        raise _ConfigProblem(f"config.output.formats: unknown formats {bad}")
    return {
        "doc": doc,
        "model": model,
        "grid": grid,
        "cap": cap,
        "scaling": scaling,
        "sweep": sweep,
        "windows": windows,
        "checks": checks,
        "directory": out_doc.get("directory", "out"),
        "formats": formats,
    }


def _h_tag(h):
    return f"{h:g}"


def _write_spectrum_files(out, spectrum, formats, cfg_hash):
    from capres import io as cio

    written = []
    stem = f"spectrum_{spectrum.method}_h{_h_tag(spectrum.h)}"
    if "csv" in formats:
        path = out / f"{stem}.csv"
        cio.atomic_write_text(path, cio.spectrum_csv(spectrum, cfg_hash))
        written.append(path)
    if "json" in formats:
        path = out / f"{stem}.json"
        cio.atomic_write_text(path, cio.spectrum_json(spectrum, cfg_hash))
        written.append(path)
    return written


def _stage_spectra(cfg, h, want_vectors):
    from capres.operators import assemble_p_dirichlet, assemble_p_theta, assemble_q_cap
    from capres.spectra import eig_dense

    model = cfg["model"].with_h(h)
    out = {}
    p_op = assemble_p_dirichlet(model, cfg["grid"])
    out["dirichlet"] = (p_op, eig_dense(p_op))
    if cfg["cap"] is not None:
        q_op = assemble_q_cap(model, cfg["grid"], cfg["cap"])
        out["cap"] = (q_op, eig_dense(q_op, want_vectors=want_vectors))
    if cfg["scaling"] is not None:
        t_op = assemble_p_theta(model, cfg["grid"], cfg["scaling"])
        out["scaled"] = (t_op, eig_dense(t_op))
    return model, out


def _stage_oracle(cfg, h):
    from capres.oracle import argument_count, find_resonances

    model = cfg["model"].with_h(h)
    results = []
    for box in cfg["windows"]:
        res = find_resonances(model, box)
        count = argument_count(model, box)
        results.append({"box": box, "resonances": res, "argument_count": count})
    return results


def _run_checks(cfg, h, ops, oracle_results, seed):
    """Run requested checks for one h; returns (results dict, all_hard_ok)."""
    import numpy as np

    from capres import analysis
    from capres.oracle import determinant_scale
    from capres.spectra import SpectralBox

    model = cfg["model"].with_h(h)
    checks = cfg["checks"]
    results = {}
    hard_ok = True

    if "absorption_identity" in checks and "cap" in ops:
        q_op, q_spec = ops["cap"]
        residuals = analysis.absorption_identity_check(q_op, q_spec, cfg["cap"])
        ok = bool(residuals.max() <= 1e-10)
        results["absorption_identity"] = {"max_residual": float(residuals.max()), "passed": ok}
        hard_ok &= ok

    if "resolvent_bound" in checks and "cap" in ops:
        q_op, _ = ops["cap"]
        rng = np.random.default_rng(seed)
        n = 20
        zs = model.a0 + (model.b0 - model.a0) * rng.random(n) + 1j * (1.0 - rng.random(n))
        margins = analysis.resolvent_bound_check(q_op, zs)
        tol = -1e-12 * (1.0 + np.abs(zs))
        ok = bool(np.all(margins >= tol))
        results["resolvent_bound"] = {"min_margin": float(margins.min()), "passed": ok}
        hard_ok &= ok

    if "oracle_consistency" in checks:
        entries = []
        ok = True
        for item in oracle_results:
            found = sum(r.multiplicity for r in item["resonances"])
            match = found == item["argument_count"]
            res_ok = all(
                r.determinant_residual <= 1e-10 * determinant_scale(model, r.z)
                for r in item["resonances"]
            )
            ok &= match and res_ok
            entries.append(
                {
                    "window": [item["box"].a, item["box"].b, item["box"].c],
                    "argument_count": item["argument_count"],
                    "refined": found,
                    "residuals_ok": res_ok,
                }
            )
        results["oracle_consistency"] = {"windows": entries, "passed": bool(ok)}
        hard_ok &= ok

    if "matching" in checks and "cap" in ops and oracle_results:
        reports = []
        floor = cfg["grid"].dx ** 2 / h**2
        params = analysis.MatchParams(
            a0=model.a0,
            b0=model.b0,
            gamma=(cfg["cap"].R1 - model.R0prime) if cfg["cap"] else 0.5,
            disc_floor=floor,
        )
        roots = [r.z for item in oracle_results for r in item["resonances"]]
        _, q_spec = ops["cap"]
        if roots:
            reports.append(analysis.match_spectra(roots, q_spec, "resonance_to_cap", h, params).to_dict())
            reports.append(analysis.match_spectra(q_spec, roots, "cap_to_resonance", h, params).to_dict())
            if "scaled" in ops:
                _, t_spec = ops["scaled"]
                reports.append(
                    analysis.match_spectra(roots, t_spec, "resonance_to_cap", h, params).to_dict()
                )
        results["matching"] = {"reports": reports, "passed": True}  # fitted constants are reported, not gated

    if "counting" in checks and "cap" in ops and cfg["windows"]:
        _, q_spec = ops["cap"]
        entries = []
        ok = True
        for box in cfg["windows"]:
            chosen = None
            for n_exp in (0.0, 0.5, 1.0, 1.5, 2.0):
                rep = analysis.counting_sandwich(
                    model, cfg["grid"], cfg["cap"], None, box, n_exp, h, cap_spectrum=q_spec
                )
                if rep.parameters["lower_ok"] and rep.parameters["upper_ok"]:
                    chosen = rep
                    break
            if chosen is None:
                ok = False
                chosen = rep
            entries.append(chosen.to_dict())
        results["counting"] = {"windows": entries, "passed": bool(ok)}
        hard_ok &= ok

    if "quasimode_forcing" in checks and "cap" in ops:
        _, q_spec = ops["cap"]
        target_e = 0.5 * (model.a0 + model.b0)
        well = analysis.dirichlet_well_quasimode(model, cfg["grid"], target_e)
        if model.a0 <= well.energy <= model.b0:
            qs = analysis.QuasimodeSet.from_quasimodes([well])
            rep = analysis.quasimode_implies_spectrum(qs, q_spec, h)
            ok = rep.verdict
            results["quasimode_forcing"] = {
                "energy": well.energy,
                "residual": well.residual,
                "box": list(rep.box),
                "count_in_box": rep.count_in_box,
                "fitted_c0": rep.fitted_c0,
                "regime_ok": rep.regime_ok,
                "passed": bool(ok),
            }
            hard_ok &= ok
        else:
            results["quasimode_forcing"] = {"skipped": "no well level inside the energy window", "passed": True}

    return results, bool(hard_ok)


def _pipeline(cfg, out, formats, seed, stages):
    """Run the requested stages for every h; returns (summary, all_ok)."""
    from capres import io as cio

    out.mkdir(parents=True, exist_ok=True)
    cfg_hash = cio.config_hash(cfg["doc"])
    hs = cfg["sweep"] or [cfg["model"].h]
    want_vectors = "absorption_identity" in cfg["checks"]
    summary = {"config_sha256": cfg_hash, "runs": []}
    all_ok = True
    plot_rows = []
    oracle_doc = {"config_sha256": cfg_hash, "runs": []}
    for h in hs:
        run_entry = {"h": h}
        ops = {}
        if stages & {"spectrum", "compare", "checks"}:
            _, ops = _stage_spectra(cfg, h, want_vectors)
            for method, (_, spec) in ops.items():
                _write_spectrum_files(out, spec, formats, cfg_hash)
                for z in spec.eigenvalues:
                    plot_rows.append((z.real, z.imag, method, h))
        oracle_results = []
        if stages & {"oracle", "compare", "checks"}:
            oracle_results = _stage_oracle(cfg, h)
            entry = {
                "h": h,
                "windows": [
                    {
                        "window": [it["box"].a, it["box"].b, it["box"].c],
                        "argument_count": it["argument_count"],
                        "resonances": json.loads(
                            cio.resonances_json(it["resonances"], h)
                        )["resonances"],
                    }
                    for it in oracle_results
                ],
            }
            oracle_doc["runs"].append(entry)
            if "csv" in formats:
                flat = [r for it in oracle_results for r in it["resonances"]]
                cio.atomic_write_text(
                    out / f"oracle_resonances_h{_h_tag(h)}.csv", cio.resonances_csv(flat, h, cfg_hash)
                )
            for it in oracle_results:
                for r in it["resonances"]:
                    plot_rows.append((r.z.real, r.z.imag, "oracle", h))
        if stages & {"checks", "compare"}:
            check_names = cfg["checks"] if "checks" in stages else [
                c for c in cfg["checks"] if c in ("matching", "counting")
            ] or ["matching", "counting"]
            sub_cfg = dict(cfg)
            sub_cfg["checks"] = check_names
            results, ok = _run_checks(sub_cfg, h, ops, oracle_results, seed)
            run_entry["checks"] = results
            all_ok &= ok
        summary["runs"].append(run_entry)
    if stages & {"oracle", "compare", "checks"}:
        cio.write_json(out / "oracle_resonances.json", oracle_doc)
    if stages & {"compare", "checks"}:
        matching = [r["checks"].get("matching") for r in summary["runs"] if "checks" in r]
        counting = [r["checks"].get("counting") for r in summary["runs"] if "checks" in r]
        cio.write_json(out / "report_matching.json", {"config_sha256": cfg_hash, "per_h": matching})
        cio.write_json(out / "report_counting.json", {"config_sha256": cfg_hash, "per_h": counting})
        if "csv" in formats:
            docs = [rep for m in matching if m for rep in m.get("reports", [])]
            cio.atomic_write_text(out / "report_matching.csv", cio.comparison_csv(docs, cfg_hash))
    if plot_rows:
        lines = [f"# config_sha256={cfg_hash}", "re,im,method,h"]
        for re_, im_, method, h in plot_rows:
            lines.append(f"{cio.fmt(re_)},{cio.fmt(im_)},{method},{cio.fmt(h)}")
        cio.atomic_write_text(out / "plot_data.csv", "\n".join(lines) + "\n")
    return summary, all_ok


def _render_report(cfg, out):
    """Merge run artifacts in `out` into report.json and render figures."""
    from capres import io as cio
    from capres import plots

    merged = {"artifacts": {}}
    for name in ("oracle_resonances.json", "report_matching.json", "report_counting.json", "run_summary.json"):
        p = out / name
        if p.exists():
            merged["artifacts"][name] = json.loads(p.read_text())
    rows_by_h = {}
    plot_csv = out / "plot_data.csv"
    if plot_csv.exists():
        for line in plot_csv.read_text().splitlines():
            if line.startswith("#") or line.startswith("re,"):
                continue
            re_, im_, method, h = line.split(",")
            rows_by_h.setdefault(float(h), []).append((float(re_), float(im_), method))
    figures = []
    windows = cfg["windows"]
    win = (windows[0].a, windows[0].b, windows[0].c) if windows else None
    for h, rows in sorted(rows_by_h.items()):
        path = out / "figures" / f"spectra_h{_h_tag(h)}.png"
        plots.render_spectra_figure(rows, path, title=f"h = {h:g}", window=win)
        figures.append(str(path))
    oracle_doc = merged["artifacts"].get("oracle_resonances.json")
    if oracle_doc:
        records = {}
        for run in oracle_doc.get("runs", []):
            pts = [
                (r["re"], r["im"])
                for w in run.get("windows", [])
                for r in w.get("resonances", [])
            ]
            if pts:
                records[run["h"]] = pts
        if records:
            path = out / "figures" / "resonance_widths.png"
            plots.render_width_figure(records, path)
            figures.append(str(path))
    merged["figures"] = figures
    merged["config_sha256"] = cio.config_hash(cfg["doc"])
    cio.write_json(out / "report.json", merged)
    return merged


def _apply_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "BLIS_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser():
    parser = argparse.ArgumentParser(prog="capres", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("run", "full pipeline: spectra, oracle, comparisons, checks"),
        ("spectrum", "assemble operators and write their spectra"),
        ("oracle", "transfer-matrix resonance search in the configured windows"),
        ("compare", "matching and counting reports against the oracle"),
        ("sweep", "full pipeline for every h in config.sweep"),
        ("report", "merge run outputs into report.json and render figures"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default: config output.directory)")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="restrict output formats")
        p.add_argument("--seed", type=int, default=42, help="seed for sampled points in resolvent checks")
        p.add_argument("--threads", type=int, default=None, help="cap the BLAS thread pool")
    return parser


_STAGES = {
    "run": {"spectrum", "oracle", "compare", "checks"},
    "spectrum": {"spectrum"},
    "oracle": {"oracle"},
    "compare": {"spectrum", "oracle", "compare"},
    "sweep": {"spectrum", "oracle", "compare", "checks"},
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    try:
        cfg = load_config(args.config)
    except _ConfigProblem as exc:
        print(f"capres: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg["directory"])
    formats = [args.format] if args.format else cfg["formats"]
    if args.command == "sweep" and not cfg["sweep"]:
        print("capres: config error: sweep requires config.sweep", file=sys.stderr)
        return EXIT_CONFIG
    from capres.errors import CapresError

    try:
        if args.command == "report":
            _render_report(cfg, out)
            print(f"report written to {out / 'report.json'}")
            return EXIT_OK
        stages = _STAGES[args.command]
        summary, ok = _pipeline(cfg, out, formats, args.seed, stages)
        from capres import io as cio

        if "checks" in stages:
            cio.write_json(out / "run_summary.json", summary)
            _render_report(cfg, out)
            for run in summary["runs"]:
                for name, res in run.get("checks", {}).items():
                    status = "pass" if res.get("passed") else "FAIL"
                    print(f"h={run['h']:g} {name}: {status}")
            if not ok:
                return EXIT_CHECK_FAILED
        return EXIT_OK
    except CapresError as exc:
        print(f"capres: numerical failure in stage '{args.command}': {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
