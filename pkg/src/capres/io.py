"""Deterministic artifact serialization: spectra, resonances and reports.

Floats are written with 17 significant digits (round-trip exact), rows keep
the spectra's deterministic ordering, and every file embeds the hash of the
configuration that produced it.  Writes are whole-file atomic.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

__all__ = [
    "fmt",
    "config_hash",
    "atomic_write_text",
    "spectrum_csv",
    "spectrum_json",
    "resonances_csv",
    "resonances_json",
    "comparison_csv",
    "write_json",
]


def fmt(x) -> str:
    """17-significant-digit decimal form; round-trips any double exactly."""
    return f"{float(x):.17g}"


def config_hash(doc) -> str:
    """sha256 of the canonical (sorted keys, compact) JSON form of a config."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def atomic_write_text(path, text):
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_capres_")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def spectrum_csv(spectrum, cfg_hash="") -> str:
    lines = [f"# config_sha256={cfg_hash}", "re,im,residual,method,h"]
    res = spectrum.residuals
    for i, z in enumerate(spectrum.eigenvalues):
        r = "" if res is None else fmt(res[i])
        lines.append(f"{fmt(z.real)},{fmt(z.imag)},{r},{spectrum.method},{fmt(spectrum.h)}")
    return "\n".join(lines) + "\n"


def spectrum_json(spectrum, cfg_hash="") -> str:
    doc = {
        "config_sha256": cfg_hash,
        "method": spectrum.method,
        "h": spectrum.h,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in spectrum.eigenvalues],
        "residuals": None
        if spectrum.residuals is None
        else [float(r) for r in spectrum.residuals],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def resonances_csv(resonances, h, cfg_hash="") -> str:
    """Oracle output in the spectrum schema plus determinant-residual and
    multiplicity columns."""
    lines = [
        f"# config_sha256={cfg_hash}",
        "re,im,residual,method,h,determinant_residual,multiplicity",
    ]
    for r in resonances:
        lines.append(
            f"{fmt(r.z.real)},{fmt(r.z.imag)},,oracle,{fmt(h)},{fmt(r.determinant_residual)},{r.multiplicity}"
        )
    return "\n".join(lines) + "\n"


def resonances_json(resonances, h, cfg_hash="", extra=None) -> str:
    doc = {
        "config_sha256": cfg_hash,
        "method": "oracle",
        "h": h,
        "resonances": [
            {
                "re": float(r.z.real),
                "im": float(r.z.imag),
                "determinant_residual": float(r.determinant_residual),
                "multiplicity": int(r.multiplicity),
                "winding_verified": bool(r.winding_verified),
                "degenerate": bool(r.degenerate),
            }
            for r in resonances
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def comparison_csv(report_docs, cfg_hash="") -> str:
    """Flat per-pair rows of one or more comparison reports, for plotting."""
    lines = [
        f"# config_sha256={cfg_hash}",
        "direction,h,source_re,source_im,target_re,target_im,distance,eligible,box_satisfied",
    ]
    for doc in report_docs:
        h = doc.get("parameters", {}).get("h", "")
        for p in doc.get("pairs", []):
            src, tgt = p["source"], p["target"]
            tgt_re = "" if tgt is None else fmt(tgt[0])
            tgt_im = "" if tgt is None else fmt(tgt[1])
            sat = "" if p["boxSatisfied"] is None else str(bool(p["boxSatisfied"])).lower()
            lines.append(
                f"{doc['direction']},{fmt(h)},{fmt(src[0])},{fmt(src[1])},{tgt_re},{tgt_im},"
                f"{fmt(p['distance'])},{str(bool(p['eligible'])).lower()},{sat}"
            )
    return "\n".join(lines) + "\n"


def write_json(path, doc):
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
