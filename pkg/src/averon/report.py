"""Deterministic JSON for analysis artifacts.

Floats are written with 17 significant digits, keys are sorted and complex
numbers become ``{"re": .., "im": ..}``.  Every artifact carries a SHA-256
checksum of its own canonical text (without the checksum field), so a
tampered file is detected on reload.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .series import EpsSeries
from .stability import RootBranch, StabilityReport

__all__ = [
    "ChecksumError",
    "canonical",
    "dumps",
    "loads_checked",
    "checksum",
    "reduction_dict",
    "stability_dict",
    "stability_from_dict",
]


class ChecksumError(ValueError):
    pass


def _fmt(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return json.dumps(str(x))
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def canonical(obj):
    """Plain JSON types only (numpy and complex values converted)."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, EpsSeries):
        return canonical(list(obj.coeffs))
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _emit(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(pad + json.dumps(key) + ": ")
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad)
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(canonical(obj), indent, 0, out)
    return "".join(out) + "\n"


def checksum(obj) -> str:
    body = {k: v for k, v in canonical(obj).items() if k != "checksum"}
    return "sha256:" + hashlib.sha256(dumps(body).encode()).hexdigest()


def with_checksum(obj: dict) -> dict:
    obj = dict(canonical(obj))
    obj["checksum"] = checksum(obj)
    return obj


def loads_checked(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChecksumError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "checksum" not in data:
        raise ChecksumError("report has no checksum field")
    want = checksum(data)
    if data["checksum"] != want:
        raise ChecksumError(f"checksum mismatch: file says {data['checksum']}, content hashes to {want}")
    return data


def _c(v) -> complex:
    if isinstance(v, dict):
        return complex(v["re"], v["im"])
    return complex(v)


def reduction_dict(red) -> dict:
    d = {
        "alpha_star": red.alpha_star,
        "r": red.r,
        "jet_order": red.order,
        "z_coeffs": {"value": red.z_coeffs,
                     "source": "initial-condition jet z_i = (alpha_i, beta_i) of the bifurcating branch"},
        "alpha_coeffs": {"value": [red.alpha_star] + list(red.alpha_coeffs[1:]),
                         "source": "implicit-function recursion on f_r + eps f_(r+1) + ..."},
        "beta_coeffs": {"value": red.beta_coeffs,
                        "source": "Faa di Bruno expansion of gamma_j(alpha(eps)) with gamma_0 = beta"},
        "df_r": {"value": red.df_r, "source": "Jacobian of the first non-vanishing bifurcation function"},
        "det_df_r": float(np.linalg.det(red.df_r)),
        "f_at_zero": {"value": red.f, "source": "bifurcation functions f_j at alpha*"},
        "A": {"value": red.A,
              "source": "eps-coefficients A_j of the Poincare-map Jacobian along z(eps) (A_0 = Y_0(T))"},
    }
    if red.m < red.n:
        d["Gamma"] = {"value": red.Gamma, "source": "upper-right block of dg_0 at z_alpha*"}
        d["Delta"] = {"value": red.Delta, "source": "lower-right block of dg_0 at z_alpha*"}
        d["dbeta"] = {"value": red.dbeta, "source": "Jacobian of the manifold graph beta at alpha*"}
        d["gamma_at_zero"] = {"value": red.gamma, "source": "transverse corrections gamma_j at alpha*"}
    return d


_MATRIX_SOURCES = {
    "A_ell": "leading coefficient of eps^-l A(eps)",
    "A_eps": "A(eps) = d_z Pi(z(eps), eps) - Y_0(T)",
    "L": "block-diagonalising conjugation of Y_0(T)",
    "N0": "N(0) = I + Delta - dbeta Gamma",
    "M_ell": "leading coefficient of M(eps) = A - B (Delta' + D)^-1 C",
    "A": "conjugated upper-left block",
    "B": "conjugated upper-right block",
    "C": "conjugated lower-left block",
    "D": "conjugated lower-right block",
    "P": "(1 - omega)^s P(omega; eps), rows eps^i, columns omega^d",
    "Q": "Q(lambda; eps) / eps^(m l), rows eps^i, columns lambda^d",
    "P_factor_power": "exponent s of the (1 - omega) factor clearing denominators in P",
}


def stability_dict(rep: StabilityReport) -> dict:
    mats = {k: {"value": v, "source": _MATRIX_SOURCES.get(k, k)} for k, v in rep.matrices.items()}
    return {
        "case": rep.case,
        "ell": rep.ell,
        "mu": rep.mu,
        "verdict": rep.verdict,
        "real_part_verdict": rep.real_part_verdict,
        "R": rep.R,
        "flags": rep.flags,
        "notes": rep.notes,
        "counts": rep.counts(),
        "branches": [b.as_dict() for b in rep.branches],
        "matrices": mats,
    }


def stability_from_dict(d: dict) -> StabilityReport:
    """Rebuild enough of a report (branches and verdict) for oracle comparison."""
    branches = []
    for b in d["branches"]:
        br = RootBranch(b["label"], b["boundary"], _c(b["root0"]), b["position"])
        if "jet" in b:
            br.jet = EpsSeries(np.array([_c(v) for v in b["jet"]]))
        if "modulus_series" in b:
            br.modulus = EpsSeries(np.array([float(_c(v).real) for v in b["modulus_series"]]))
            br.modulus_sign = b.get("modulus_sign")
            br.modulus_order = b.get("modulus_order")
        br.real_part_sign = b.get("real_part_sign")
        br.real_part_order = b.get("real_part_order")
        branches.append(br)
    return StabilityReport(
        case=d["case"], ell=d["ell"], mu=d["mu"], matrices={}, branches=branches,
        verdict=d["verdict"], flags=d.get("flags", {}), notes=d.get("notes", []),
        real_part_verdict=d.get("real_part_verdict"),
    )
