"""Command-line front end: ``averon {analyze|verify|sweep} <file> ...``.

Exit codes: 0 success, 2 parse or input error, 3 numerical failure,
4 disagreement between the oracle and the predicted verdict.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dsl.compile import TransformError, load_system
from .dsl.parser import ParseError
from .flow import IntegrationError
from .oracle import ShootingError, compare, poincare_iterates, run_oracle
from .pipeline import analyze_orbit, hypothesis_checks, scan_zeros
from .reduction import ReductionError
from .report import ChecksumError, dumps, loads_checked, reduction_dict, stability_dict, stability_from_dict, with_checksum
from .series import SeriesError
from .stability import StabilityError
from .system import PeriodicityError

log = logging.getLogger("averon")

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_DISAGREE = 0, 2, 3, 4

TOLERANCES = {
    "zero_newton": 1e-12,
    "shooting": 1e-10,
    "leading_order_rtol": 1e-9,
    "simple_critical_gap": 1e-6,
    "oracle_band_factor": 5.0,
    "integrator_rtol": 1e-10,
    "integrator_atol": 1e-12,
}

NUMERIC_ERRORS = (ReductionError, StabilityError, IntegrationError, ShootingError, SeriesError,
                  ArithmeticError, np.linalg.LinAlgError)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- argument helpers -------------------------------------------------------------

def parse_params(items: list[str] | None) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in items or []:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise CliError(EXIT_PARSE, f"parameter override {part!r} is not of the form name=value")
            k, v = part.split("=", 1)
            out[k.strip()] = _number(v)
    return out


def _number(text: str) -> float:
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except ValueError:
        raise CliError(EXIT_PARSE, f"not a number: {text!r}") from None


def parse_vector(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [_number(v) for v in text.split(",") if v.strip()]


def threads() -> int:
    env = os.environ.get("AVERON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(EXIT_PARSE, f"AVERON_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _map(fn, tasks: list):
    """Ordered map, parallel across processes up to ``AVERON_THREADS``."""
    n = min(threads(), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, tasks))


def _config(args) -> dict:
    try:
        raw = Path(args.file).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {args.file}: {exc.strerror}") from exc
    cfg = {
        "command": args.command,
        "system": str(Path(args.file).name),
        "system_sha256": hashlib.sha256(raw).hexdigest(),
        "params": parse_params(args.param),
        "zero_guess": parse_vector(args.zero_guess),
        "mu": args.mu,
        "mu1": args.mu1,
        "mu2": args.mu2,
    }
    return cfg


def _config_hash(cfg: dict) -> str:
    return "sha256:" + hashlib.sha256(dumps(cfg).encode()).hexdigest()


def _load(path: str, params: dict):
    try:
        return load_system(Path(path), params)
    except FileNotFoundError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from exc
    except ParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc
    except (TransformError, PeriodicityError, KeyError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc


# -- analyze ----------------------------------------------------------------------

def _analysis(args) -> dict:
    cfg = _config(args)
    loaded = _load(args.file, cfg["params"])
    if loaded.manifold is None:
        raise CliError(EXIT_PARSE, f"{args.file}: no [manifold] block")
    try:
        guess = cfg["zero_guess"]
        if guess is not None:
            if len(guess) != loaded.manifold.m:
                raise CliError(EXIT_PARSE, f"--zero-guess needs {loaded.manifold.m} values")
            zeros = [np.array(guess)]
        else:
            zeros = scan_zeros(loaded)
            if not zeros:
                raise CliError(EXIT_NUMERIC, "grid scan found no simple zero of the bifurcation function")
        orbits = []
        for a in zeros:
            an = analyze_orbit(loaded, a, mu=args.mu, mu1=args.mu1, mu2=args.mu2)
            orbits.append({
                "alpha_star": an.alpha_star,
                "reduction": reduction_dict(an.reduction),
                "stability": stability_dict(an.report),
            })
        hyp = hypothesis_checks(loaded)
    except NUMERIC_ERRORS as exc:
        raise CliError(EXIT_NUMERIC, f"numerical failure: {exc}") from exc
    return {
        "tool": "averon",
        "version": __version__,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "tolerances": TOLERANCES,
        "system": {"dim": loaded.system.dim, "m": loaded.manifold.m, "period": loaded.system.period,
                   "order": loaded.system.order, "params": loaded.params},
        "hypotheses": hyp,
        "orbits": orbits,
    }


def cmd_analyze(args) -> int:
    data = with_checksum(_analysis(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(data))
    if args.format == "csv":
        _write_csv(out / "report.csv", ["orbit", "alpha_star", "verdict", "real_part_verdict", "R", "ell"],
                   [[k, " ".join(_g(v) for v in o["alpha_star"]), o["stability"]["verdict"],
                     o["stability"]["real_part_verdict"], _g(o["stability"]["R"]), o["stability"]["ell"]]
                    for k, o in enumerate(data["orbits"])])
    for o in data["orbits"]:
        st = o["stability"]
        print(f"alpha* = {_vec(o['alpha_star'])}  verdict {st['verdict']}  R = {_g(st['R'])}")
    return EXIT_OK


# -- verify -----------------------------------------------------------------------

def _eps_list(args) -> list[float]:
    if not args.eps:
        base = 1 / 50
        return [base, base / 2, base / 4]
    vals = parse_vector(args.eps)
    if len(vals) == 1:
        return [vals[0], vals[0] / 2, vals[0] / 4]
    return vals


def _oracle_task(task):
    path, params, eps, guess, g1, ell = task
    loaded = load_system(Path(path), params, check_periodicity=False)
    z0, z1 = np.array(guess), np.array(g1)
    try:
        res = run_oracle(loaded.system, eps, z0 + eps * z1, ell=ell, guess_fn=lambda e: z0 + e * z1)
    except (ShootingError, IntegrationError) as exc:
        return eps, None, str(exc)
    return eps, res, None


def cmd_verify(args) -> int:
    out = Path(args.out)
    report_path = Path(args.report) if args.report else out / "report.json"
    if report_path.exists():
        try:
            data = loads_checked(report_path.read_text())
        except ChecksumError as exc:
            raise CliError(EXIT_PARSE, f"{report_path}: {exc}") from exc
    else:
        data = with_checksum(_analysis(args))
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(dumps(data))
    params = data["config"]["params"]
    loaded = _load(args.file, params)
    eps_list = _eps_list(args)
    summary = {"tool": "averon", "version": __version__, "report_checksum": data["checksum"],
               "eps": eps_list, "orbits": []}
    disagree = failed = False
    for orbit in data["orbits"]:
        rep = stability_from_dict(orbit["stability"])
        zc = [np.array(v) for v in orbit["reduction"]["z_coeffs"]["value"]]
        tasks = [(str(Path(args.file).resolve()), params, e, zc[0].tolist(), zc[1].tolist(), rep.ell)
                 for e in eps_list]
        results, errors = [], []
        for eps, res, err in _map(_oracle_task, tasks):
            if res is None:
                errors.append({"eps": eps, "error": err})
                failed = True
            else:
                results.append(res)
        table = compare(rep, results, zc[0])
        if any(not r["agree"] for r in table["rows"]):
            disagree = True
        summary["orbits"].append({
            "alpha_star": orbit["alpha_star"],
            "predicted_verdict": rep.verdict,
            "comparison": table,
            "oracle": [r.as_dict() for r in sorted(results, key=lambda r: r.eps)],
            "failures": errors,
        })
        if results:
            _trajectory_csv(out, loaded, zc, max(r.eps for r in results), len(summary["orbits"]) - 1)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(dumps(with_checksum(summary)))
    rows = []
    for k, o in enumerate(summary["orbits"]):
        for r in o["comparison"]["rows"]:
            for j, (p, q) in enumerate(zip(r["predicted_moduli"], r["oracle_moduli"])):
                rows.append([k, _g(r["eps"]), j, _g(p), _g(q), r["oracle_verdict"], r["agree"]])
    _write_csv(out / "multipliers.csv",
               ["orbit", "eps", "branch", "predicted_modulus", "oracle_modulus", "oracle_verdict", "agree"], rows)
    for k, o in enumerate(summary["orbits"]):
        t = o["comparison"]
        print(f"orbit {k}: predicted {o['predicted_verdict']}, agreement {t['agreement']}/{t['total']}")
        for e in o["failures"]:
            print(f"  eps = {_g(e['eps'])}: shooting failed: {e['error']}", file=sys.stderr)
    if failed:
        return EXIT_NUMERIC
    return EXIT_DISAGREE if disagree else EXIT_OK


def _trajectory_csv(out: Path, loaded, zc, eps: float, idx: int, periods: int = 20, samples: int = 40):
    """Orbit from ``z_0 + eps z_1`` in the original coordinates, for plotting."""
    start = zc[0] + eps * zc[1]
    _, traj = poincare_iterates(loaded.system, eps, start, count=periods, samples=samples)
    names = list(loaded.system.names)
    header = ["t"] + names
    sf = loaded.transform
    if sf is not None:
        header += list(sf.original_states)
    rows = []
    for t, *x in traj:
        row = [_g(t)] + [_g(v) for v in x]
        if sf is not None:
            row += [_g(v) for v in sf.to_original(t, list(x))]
        rows.append(row)
    _write_csv(out / f"trajectory_{idx}.csv", header, rows)


# -- sweep ------------------------------------------------------------------------

def _sweep_task(task):
    path, params, guess, mu, mu1, mu2 = task
    loaded = load_system(Path(path), params, check_periodicity=False)
    try:
        an = analyze_orbit(loaded, guess, mu=mu, mu1=mu1, mu2=mu2)
    except NUMERIC_ERRORS as exc:
        return {"error": str(exc)}
    rep = an.report
    crit = [b for b in rep.critical if b.jet is not None]
    mod = None
    if crit and crit[0].modulus is not None and crit[0].modulus_order is not None:
        mod = float(crit[0].modulus.coeffs[crit[0].modulus_order])
    return {"verdict": rep.verdict, "real_part_verdict": rep.real_part_verdict, "R": rep.R,
            "modulus_coefficient": mod, "alpha_star": an.alpha_star.tolist()}


def _parse_range(text: str):
    try:
        name, rng = text.split("=", 1)
        lo, hi, count = rng.split(":")
        return name.strip(), _number(lo), _number(hi), int(count)
    except ValueError:
        raise CliError(EXIT_PARSE, f"--range must look like name=lo:hi:count, got {text!r}") from None


def _crossings(xs, ys):
    out = []
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if y0 is None or y1 is None:
            continue
        if y0 == 0:
            out.append(x0)
        elif y0 * y1 < 0:
            out.append(x0 - y0 * (x1 - x0) / (y1 - y0))
    return out


def cmd_sweep(args) -> int:
    if not args.range:
        raise CliError(EXIT_PARSE, "sweep needs --range name=lo:hi:count")
    name, lo, hi, count = _parse_range(args.range)
    params = parse_params(args.param)
    loaded = _load(args.file, params)
    if name not in loaded.params:
        raise CliError(EXIT_PARSE, f"unknown parameter {name!r}")
    guess = parse_vector(args.zero_guess)
    if guess is None:
        zeros = scan_zeros(loaded)
        if not zeros:
            raise CliError(EXIT_NUMERIC, "grid scan found no simple zero of the bifurcation function")
        guess = zeros[0].tolist()
    values = list(np.linspace(lo, hi, count)) if count > 0 else []
    path = str(Path(args.file).resolve())
    tasks = [(path, {**params, name: float(v)}, guess, args.mu, args.mu1, args.mu2) for v in values]
    results = _map(_sweep_task, tasks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v, r in zip(values, results):
        rows.append([_g(v), r.get("verdict", "Error"), r.get("real_part_verdict", ""),
                     _g(r.get("R")), _g(r.get("modulus_coefficient")), r.get("error", "")])
    _write_csv(out / "sweep.csv", [name, "verdict", "real_part_verdict", "R", "modulus_coefficient", "error"], rows)
    Rs = [r.get("R") for r in results]
    mods = [r.get("modulus_coefficient") for r in results]
    flips = [0.5 * (values[k] + values[k + 1]) for k in range(len(values) - 1)
             if results[k].get("verdict") != results[k + 1].get("verdict")]
    summary = {"parameter": name, "values": values, "results": results,
               "R_zero_crossings": _crossings(values, Rs),
               "modulus_zero_crossings": _crossings(values, mods),
               "verdict_changes": flips}
    (out / "sweep.json").write_text(dumps(with_checksum(summary)))
    for x in summary["R_zero_crossings"]:
        print(f"R changes sign at {name} = {_g(x)}")
    for x in summary["modulus_zero_crossings"]:
        print(f"multiplier modulus coefficient changes sign at {name} = {_g(x)}")
    return EXIT_OK


# -- plumbing ---------------------------------------------------------------------

def _g(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _vec(v) -> str:
    return "(" + ", ".join(format(float(x), ".10g") for x in v) + ")"


def _write_csv(path: Path, header: list[str], rows: list[list]):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="averon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"averon {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("analyze", "reduce, expand and classify the bifurcating orbits"),
                      ("verify", "check the predicted verdicts against direct shooting"),
                      ("sweep", "verdict and stability constant across a parameter range")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("file", help="system file (.avsys)")
        s.add_argument("--param", action="append", help="parameter overrides name=value[,name=value]")
        s.add_argument("--zero-guess", help="comma-separated starting point for the zero of f_r")
        s.add_argument("--mu", type=int, help="jet order (full-dimensional case)")
        s.add_argument("--mu1", type=int, help="jet order of P (reduced case)")
        s.add_argument("--mu2", type=int, help="jet order of Q (reduced case)")
        s.add_argument("--eps", help="comma-separated eps values for the oracle")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            s.add_argument("--report", help="report.json to verify (default: <out>/report.json)")
        if name == "sweep":
            s.add_argument("--range", help="name=lo:hi:count")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"analyze": cmd_analyze, "verify": cmd_verify, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"averon: error: {exc}", file=sys.stderr)
        return exc.code
    except NUMERIC_ERRORS as exc:
        print(f"averon: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
