"""Command-line front end.

Every run writes one JSON document with ``meta`` (config echo, version,
rotation applied), ``results`` and ``diagnostics``; ``--format csv`` emits a
flat table instead.  Floats are written with 17 significant digits and lists
are sorted, so identical configs give byte-identical output.

Exit codes: 0 success, 2 config error, 3 numerical-resolution failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .lyapunov import BranchPointError, trace_batch
from .monodromy import PropagationError, PropagatorConfig, SeriesError
from .potential import PotentialSpecError, load_potential, parse_potential_spec, normalize_potential
from .spectrum.asymptotics import asymptotic_residuals, reconstruction_report, spectral_cluster
from .spectrum.bands import BandResolutionError, branch_values, classify_gaps, scan_bands
from .spectrum.contour import ContourError, DegenerateTargetError, Rect
from .spectrum.roots import (RootResolutionError, antiperiodic_eigenvalues, complex_resonances,
                             periodic_eigenvalues)
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_RESOLUTION, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_WINDOW = (-20.0, 200.0)
DEFAULT_RECT = (0.0, 200.0, -10.0, 10.0)

RESOLUTION_ERRORS = (BandResolutionError, RootResolutionError, ContourError, PropagationError,
                     BranchPointError, SeriesError)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    potential: str | None = None
    window: tuple[float, float] = DEFAULT_WINDOW
    rect: tuple[float, float, float, float] = DEFAULT_RECT
    grid: float = 32.0
    tol: float = 1e-11
    steps: int = 64
    out: str | None = None
    format: str = "json"
    n_max: int = 30
    truncate: int = 40
    which: str = "periodic"
    suite: str | None = None
    points: int = 201

    def validate(self):
        lo, hi = self.window
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ConfigError(f"window must satisfy min < max, got {self.window}")
        r = self.rect
        if not (r[1] > r[0] and r[3] > r[2]):
            raise ConfigError(f"rect must satisfy re0 < re1 and im0 < im1, got {self.rect}")
        for name in ("grid", "tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"--{name} must be positive")
        for name in ("steps", "n_max", "truncate", "points"):
            if getattr(self, name) < 1:
                raise ConfigError(f"--{name.replace('_', '-')} must be a positive integer")
        if self.format not in ("json", "csv"):
            raise ConfigError("--format must be json or csv")
        return self

    @property
    def propagator(self):
        return PropagatorConfig(base_steps=self.steps, tol=self.tol)

    def echo(self):
        d = {"command": self.command, "potential": self.potential, "window": list(self.window),
             "grid": self.grid, "tol": self.tol, "steps": self.steps, "format": self.format}
        if self.command == "resonances":
            d["rect"] = list(self.rect)
        if self.command == "eigs":
            d["which"] = self.which
        if self.command in ("asymptotics", "verify"):
            d["n_max"] = self.n_max
        if self.command == "reconstruct":
            d["truncate"] = self.truncate
        if self.command == "sweep":
            d["points"] = self.points
        if self.command == "verify":
            d["suite"] = self.suite
        return d


# --------------------------------------------------------------------------
# deterministic serialization


def _clean(obj):
    """Plain JSON types; complex numbers become ``[re, im]``, non-finite floats ``null``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _emit(obj, indent=0):
    pad, pad1 = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad1}{json.dumps(k)}: {_emit(v, indent + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad1 + _emit(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return "%.17g" % obj
    return json.dumps(obj)


def dumps(doc):
    return _emit(_clean(doc)) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands


def _load(cfg):
    if cfg.potential is None:
        raise ConfigError("--potential is required")
    try:
        if cfg.potential.lstrip().startswith("{"):
            return normalize_potential(parse_potential_spec(cfg.potential))
        return load_potential(cfg.potential)
    except OSError as exc:
        raise ConfigError(f"cannot read potential: {exc}") from exc


def _meta(cfg, potential=None):
    meta = {"config": cfg.echo(), "version": __version__}
    if potential is not None:
        meta["potential"] = potential.metadata()
    return meta


def _zeros(zs):
    return sorted((z.to_dict() for z in zs), key=lambda d: (d["re"], d["im"]))


def cmd_bands(cfg):
    P = _load(cfg)
    rep = classify_gaps(scan_bands(P, cfg.window, cfg.grid, cfg.propagator))
    if cfg.format == "csv":
        rows = [("band", b.lo, b.hi, "+".join(map(str, b.branches))) for b in rep.bands]
        rows += [("gap", g.lo, g.hi, g.kind) for g in rep.gaps]
        rows += [("exterior", a, b, "") for a, b in rep.exterior]
        return to_csv(["type", "lo", "hi", "info"], sorted(rows, key=lambda r: (r[1], r[0]))), 0
    res = rep.to_dict()
    diag = res.pop("diagnostics")
    diag["flagged_gaps"] = sum(g.flagged for g in rep.gaps)
    return {"meta": _meta(cfg, P), "results": res, "diagnostics": diag}, 0


def cmd_eigs(cfg):
    P = _load(cfg)
    fn = periodic_eigenvalues if cfg.which == "periodic" else antiperiodic_eigenvalues
    zs = fn(P, cfg.window, cfg.grid, cfg.propagator)
    if cfg.format == "csv":
        return to_csv(["lambda", "multiplicity"], [(z.value.real, z.multiplicity) for z in zs]), 0
    results = {"which": cfg.which, "eigenvalues": _zeros(zs),
               "total_multiplicity": sum(z.multiplicity for z in zs)}
    return {"meta": _meta(cfg, P), "results": results, "diagnostics": {}}, 0


def cmd_resonances(cfg):
    P = _load(cfg)
    rect = Rect(*cfg.rect)
    zs, total = complex_resonances(P, rect, cfg.propagator)
    if cfg.format == "csv":
        return to_csv(["re", "im", "multiplicity"],
                      [(z.value.real, z.value.imag, z.multiplicity) for z in
                       sorted(zs, key=lambda z: (z.value.real, z.value.imag))]), 0
    results = {"resonances": _zeros(zs), "total_multiplicity": sum(z.multiplicity for z in zs)}
    diag = {"contour_count": total, "contour": rect.describe()}
    return {"meta": _meta(cfg, P), "results": results, "diagnostics": diag}, 0


def cmd_sweep(cfg):
    """Real-lambda table of ``(lam, Delta_1, Delta_2, rho, D_+, D_-)`` for plotting."""
    P = _load(cfg)
    lams = np.linspace(cfg.window[0], cfg.window[1], cfg.points)
    d1, d2, rho, _ = branch_values(P, lams, cfg.propagator)
    tb = trace_batch(P, lams + 0j, config=cfg.propagator)
    cols = ["lambda", "delta1", "delta2", "rho", "d_plus", "d_minus"]
    rows = [tuple(float(v) for v in r) for r in zip(lams, d1, d2, rho, tb.d_plus.real, tb.d_minus.real)]
    if cfg.format == "csv":
        return to_csv(cols, [tuple("nan" if not math.isfinite(v) else v for v in r) for r in rows]), 0
    diag = {"max_error_estimate": float(np.max(tb.error))}
    return {"meta": _meta(cfg, P), "results": {"columns": cols, "rows": [list(r) for r in rows]},
            "diagnostics": diag}, 0


def cmd_reconstruct(cfg):
    P = _load(cfg)
    rep = reconstruction_report(P, cfg.truncate, cfg.window, cfg.points, cfg.grid, cfg.propagator)
    cols = ["lambda", "d_plus", "d_plus_rec", "d_minus", "d_minus_rec", "mu1", "mu1_rec", "rho", "rho_rec"]
    rows = [tuple(float(v) for v in r) for r in zip(rep.lam, rep.d_plus, rep.d_plus_rec, rep.d_minus,
                                                    rep.d_minus_rec, rep.mu1, rep.mu1_rec, rep.rho,
                                                    rep.rho_rec)]
    errors = rep.errors
    insufficient = max(errors["d_plus"], errors["d_minus"]) > 1e-3 or not rep.complete
    if cfg.format == "csv":
        return to_csv(cols, rows), 0
    results = {"columns": cols, "rows": [list(r) for r in rows],
               "resonances_direct": rep.resonances, "resonances_reconstructed": rep.resonances_rec}
    diag = {"errors": errors, "periodic_count": rep.periodic_count,
            "antiperiodic_count": rep.antiperiodic_count, "contour_count": rep.contour_count,
            "eigenvalue_lists_complete": rep.complete, "truncation_insufficient": insufficient}
    return {"meta": _meta(cfg, P), "results": results, "diagnostics": diag}, 0


def cmd_asymptotics(cfg):
    P = _load(cfg)
    clusters = [spectral_cluster(P, n, cfg.grid, cfg.propagator) for n in range(1, cfg.n_max + 1)]
    r = asymptotic_residuals(P, clusters, cfg.n_max)
    return {"meta": _meta(cfg, P), "results": r.to_dict(),
            "diagnostics": {"incomplete": r.incomplete, "ambiguous": r.ambiguous}}, 0


def cmd_verify(cfg):
    names = list(SUITES) if cfg.suite == "all" else [cfg.suite]
    kwargs = {"asymptotics": {"n_max": cfg.n_max}, "reconstruction": {"N": cfg.truncate}}
    results = []
    for name in names:
        res = run_suite(name, **kwargs.get(name, {}))
        print(res.line(), file=sys.stderr)
        d = res.to_dict()
        d["suite"] = name
        d.pop("seconds")     # keep the document deterministic
        results.append(d)
    passed = all(r["passed"] for r in results)
    doc = {"meta": {"config": cfg.echo(), "version": __version__},
           "results": sorted(results, key=lambda r: r["criterion"]),
           "diagnostics": {"passed": passed}}
    if cfg.format == "csv":
        rows = [(r["suite"], r["criterion"], "pass" if r["passed"] else "fail") for r in doc["results"]]
        return to_csv(["suite", "criterion", "result"], rows), 0 if passed else EXIT_VERIFY
    return doc, 0 if passed else EXIT_VERIFY


COMMANDS = {"bands": cmd_bands, "eigs": cmd_eigs, "resonances": cmd_resonances, "sweep": cmd_sweep,
            "reconstruct": cmd_reconstruct, "asymptotics": cmd_asymptotics, "verify": cmd_verify}


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--potential", help="potential JSON file or inline JSON document")
    common.add_argument("--window", nargs=2, type=float, metavar=("MIN", "MAX"), default=None)
    common.add_argument("--grid", type=float, default=32.0, help="grid points per unit sqrt(lambda)")
    common.add_argument("--tol", type=float, default=1e-11, help="relative propagator tolerance")
    common.add_argument("--steps", type=int, default=64, help="base cells per unit length")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--n-max", type=int, default=30)
    common.add_argument("--truncate", type=int, default=40)

    p = _Parser(prog="matrix-hill", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("bands", parents=[common], help="bands and classified gaps on a real window")
    e = sub.add_parser("eigs", parents=[common], help="periodic or anti-periodic eigenvalues")
    e.add_argument("--which", choices=("periodic", "antiperiodic"), default="periodic")
    r = sub.add_parser("resonances", parents=[common], help="zeros of rho in a complex rectangle")
    r.add_argument("--rect", nargs=4, type=float, metavar=("RE0", "RE1", "IM0", "IM1"), default=None)
    s = sub.add_parser("sweep", parents=[common], help="table of Lyapunov data on a real grid")
    s.add_argument("--points", type=int, default=201)
    c = sub.add_parser("reconstruct", parents=[common], help="Hadamard reconstruction of D+-")
    c.add_argument("--points", type=int, default=201)
    sub.add_parser("asymptotics", parents=[common], help="residuals of eigenvalue/resonance clusters")
    v = sub.add_parser("verify", parents=[common], help="run a built-in verification suite")
    v.add_argument("suite", choices=["all", *SUITES])
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, potential=args.potential, grid=args.grid, tol=args.tol,
                    steps=args.steps, out=args.out, format=args.format, n_max=args.n_max,
                    truncate=args.truncate)
    if args.window is not None:
        cfg.window = tuple(args.window)
    elif args.command == "reconstruct":
        cfg.window = (0.0, 50.0)
    if getattr(args, "rect", None) is not None:
        cfg.rect = tuple(args.rect)
    cfg.which = getattr(args, "which", "periodic")
    cfg.suite = getattr(args, "suite", None)
    cfg.points = getattr(args, "points", 201)
    return cfg.validate()


def run(cfg: RunConfig):
    """Execute ``cfg``; returns ``(text, exit_code)``."""
    doc, code = COMMANDS[cfg.command](cfg)
    text = doc if isinstance(doc, str) else dumps(doc)
    return text, code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        text, code = run(cfg)
    except (ConfigError, PotentialSpecError, DegenerateTargetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RESOLUTION_ERRORS as exc:
        info = {"error": type(exc).__name__, "message": str(exc)}
        interval = getattr(exc, "interval", None)
        if interval is not None:
            info["interval"] = list(interval)
        print(dumps({"diagnostics": info}), file=sys.stderr, end="")
        return EXIT_RESOLUTION
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
