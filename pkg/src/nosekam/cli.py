"""Command-line front end.

Subcommands ``simulate | normal-form | nondegen | kam-scan | verify``.  A run
reads ``--config path.json`` (validated against :data:`CONFIG_SCHEMA`, unknown
keys rejected), applies flag overrides, and writes its outputs plus a JSON
manifest into ``--out``.  Exit codes: 0 ok, 1 check failure, 2 config error,
3 solver inconsistency.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .dynamics import (DomainError, HarmonicPotential, MassProfile, ThermostatParams, make_energy,
                       make_field, nose_hoover_energy, state_columns)
from .integrate import IntegratorConfig, integrate_midpoint, rk_adaptive_integrate
from .mathcore import FlatMetric, TorusPotential, UnitCovector, UsageError
from .series import SolveError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

_RATIONAL = {"anyOf": [{"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}, {"type": "integer"}]}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nosekam run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "subcommand": {"enum": ["simulate", "normal-form", "nondegen", "kam-scan", "verify"]},
        "seed": {"type": "integer", "minimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "metric": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "potential": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["dim", "modes"],
                    "properties": {
                        "dim": {"type": "integer", "minimum": 1},
                        "modes": {"type": "array", "items": {
                            "type": "object", "additionalProperties": False, "required": ["k"],
                            "properties": {"k": {"type": "array", "items": {"type": "integer"}},
                                           "cos": {"type": "number"}, "sin": {"type": "number"}}}},
                    },
                },
                "sho": {"type": "object", "additionalProperties": False, "properties": {"k": _POS}},
                "M": _POS,
                "T": _POS,
                "k_B": _POS,
                "beta": {"type": "number", "minimum": 0},
                "mass_profile": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"kind": {"enum": ["constant", "polynomial"]}, "a": _RATIONAL,
                                   "b": _RATIONAL, "higher": {"type": "array", "items": _RATIONAL}},
                },
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "chart": {"enum": ["nose", "rescaled", "nose-hoover"]},
                "initial_state": {"type": "array", "items": {"type": "number"}},
                "t_end": _POS,
                "method": {"enum": ["midpoint", "rk"]},
                "sample_every": {"type": "integer", "minimum": 1},
            },
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"h": _POS, "newton_tol": _POS, "newton_max_iter": {"type": "integer", "minimum": 1},
                           "rk_rel_tol": _POS, "rk_abs_tol": _POS, "max_steps": {"type": "integer", "minimum": 1}},
        },
        "normal_form": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"a": _RATIONAL, "b": _RATIONAL, "N": {"type": "integer", "minimum": 2, "maximum": 8}},
        },
        "nondegen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 1}, "I": {"type": "number"},
                           "rho_min": {"type": "number"}, "rho_max": {"type": "number"},
                           "num": {"type": "integer", "minimum": 2}, "locus": {"type": "boolean"}},
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "betas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "C": {"type": "array", "items": {"type": "number"}},
                "dW": _PAIR,
                "ds": _PAIR,
                "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
                "max_crossings": {"type": "integer", "minimum": 5},
                "tol_qp": _POS,
                "tol_res": _POS,
                "h": _POS,
                "max_steps": {"type": "integer", "minimum": 1},
                "keep_sections": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "figures": {"type": "boolean"}},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "model": {"n": 1, "M": 1.0, "T": 1.0, "k_B": 1.0, "mass_profile": {"kind": "constant"}},
    "simulate": {"chart": "rescaled", "t_end": 10.0, "sample_every": 1},
    "integrator": {"h": 1e-2},
    "normal_form": {"a": "0", "b": "0", "N": 4},
    "nondegen": {"rho_min": -0.1, "rho_max": 0.1, "num": 201, "I": 0.0, "locus": True},
    "scan": {"betas": [0.0, 1e-3, 1.0], "dW": [-0.1, 0.1], "ds": [0.02, 0.2], "shape": [20, 20],
             "max_crossings": 500, "tol_qp": 1e-7, "tol_res": 1e-4, "keep_sections": True},
    "output": {"dir": "out", "figures": True},
}


class ConfigError(UsageError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# configuration

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {e.message}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    validate(data)
    return data


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON config; the output block does not change results."""
    cfg = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _set(cfg: dict, dotted: str, value) -> None:
    if value is None:
        return
    node = cfg
    *head, last = dotted.split(".")
    for k in head:
        node = node.setdefault(k, {})
    node[last] = value


def _model(cfg: dict, need_potential: bool = True):
    m = cfg["model"]
    n = int(m.get("n", 1))
    metric = FlatMetric(np.array(m["metric"], dtype=float)) if "metric" in m else FlatMetric.identity(n)
    if metric.dim != n:
        raise ConfigError(f"config field 'model.metric': dimension {metric.dim} does not match n={n}")
    if "sho" in m:
        V = HarmonicPotential(n, float(m["sho"].get("k", 1.0)))
    elif "potential" in m:
        V = TorusPotential.from_json(m["potential"])
        if V.dim != n:
            raise ConfigError(f"config field 'model.potential.dim': {V.dim} does not match n={n}")
    elif need_potential:
        raise ConfigError("config field 'model.potential' is required (or 'model.sho' for the oscillator)")
    else:
        V = TorusPotential.zero(n)
    mp = m.get("mass_profile", {"kind": "constant"})
    if mp.get("kind", "constant") == "polynomial":
        profile = MassProfile.polynomial(Fraction(str(mp.get("a", 0))), Fraction(str(mp.get("b", 0))),
                                         tuple(Fraction(str(c)) for c in mp.get("higher", ())))
    else:
        profile = MassProfile()
    pr = ThermostatParams.physical(n, float(m.get("M", 1.0)), float(m.get("T", 1.0)),
                                   float(m.get("k_B", 1.0)), profile)
    beta = float(m["beta"]) if "beta" in m else pr.beta
    return n, metric, V, pr, beta


# ---------------------------------------------------------------------------
# output helpers

class Run:
    """Output directory, config hash and manifest for one invocation."""

    def __init__(self, cfg: dict, command: str):
        self.cfg = cfg
        self.command = command
        self.hash = config_hash(cfg)
        self.dir = Path(cfg["output"]["dir"])
        self.files: list[str] = []
        self.t0 = time.perf_counter()

    def path(self, stem: str, suffix: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / f"{stem}-{self.hash[:12]}{suffix}"
        self.files.append(p.name)
        return p

    def write(self, stem: str, suffix: str, text: str) -> Path:
        p = self.path(stem, suffix)
        p.write_text(text)
        return p

    def manifest(self, extra: dict | None = None) -> Path:
        import matplotlib
        import numba
        import scipy

        data = {
            "command": self.command,
            "config_sha256": self.hash,
            "config": self.cfg,
            "outputs": self.files,
            "versions": {"nosekam": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "numba": numba.__version__,
                         "matplotlib": matplotlib.__version__},
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
        }
        if extra:
            data.update(extra)
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / f"manifest-{self.command}-{self.hash[:12]}.json"
        p.write_text(json.dumps(data, indent=2, default=str) + "\n")
        return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(cfg: dict) -> int:
    sim = cfg["simulate"]
    chart = sim["chart"]
    n, g, V, pr, beta = _model(cfg)
    icfg = IntegratorConfig(**cfg["integrator"])
    run = Run(cfg, "simulate")
    cols = state_columns(chart, n)
    dim = 2 * n + 1 if chart == "nose-hoover" else 2 * n + 2
    if "initial_state" in sim:
        y0 = np.array(sim["initial_state"], dtype=float)
        if y0.size != dim:
            raise ConfigError(f"config field 'simulate.initial_state': expected {dim} values {cols}, got {y0.size}")
    else:
        y0 = np.zeros(dim)
        y0[n] = 1.0
        if chart != "nose-hoover":
            y0[2 * n] = 1.1
    t_end = float(sim["t_end"])
    method = sim.get("method", "rk" if chart == "nose-hoover" else "midpoint")
    if chart == "nose-hoover":
        # integrate ln s alongside so the extended energy is a conserved check quantity
        base = make_field(chart, pr, V, g)

        def field(y):
            return np.concatenate([base(y[:-1]), [y[2 * n]]])

        def energy(y):
            return nose_hoover_energy(y[:-1], pr, V, g, log_s=y[-1])

        y0 = np.concatenate([y0, [0.0]])
        out_cols = cols + ["log_s", "dxi_dt"]
    else:
        field = make_field(chart, pr, V, g, beta=beta)
        energy = make_energy(chart, pr, V, g, beta=beta)
        out_cols = cols
    positive = [] if chart == "nose-hoover" else [2 * n]
    if method == "rk":
        steps = int(round(t_end / icfg.h))
        ts = np.linspace(0.0, t_end, steps // sim.get("sample_every", 1) + 1)
        orbit = rk_adaptive_integrate(field, y0, (0.0, t_end), icfg, t_eval=ts, energy=energy, positive=positive)
    else:
        steps = int(round(t_end / icfg.h))
        orbit = integrate_midpoint(field, y0, icfg.h, steps, icfg, energy=energy,
                                   sample_every=sim.get("sample_every", 1), positive=positive)
    if chart == "nose-hoover":
        dxi = np.array([base(y[:-1])[2 * n] for y in orbit.y])
        orbit.y = np.column_stack([orbit.y, dxi])
    run.write(f"orbit-{chart}", ".csv", orbit.to_csv(out_cols))
    drift = float(np.max(np.abs(orbit.energy - orbit.energy[0]))) if orbit.energy is not None else 0.0
    if cfg["output"]["figures"]:
        from .plotting import orbit_plot

        show = {c: orbit.y[:, i] for i, c in enumerate(out_cols) if c not in ("log_s", "dxi_dt")}
        orbit_plot(orbit.t, show, run.path(f"orbit-{chart}", ".svg"), orbit.energy)
    run.manifest({"energy_drift": drift, "flags": orbit.flags, "samples": len(orbit)})
    print(json.dumps({"chart": chart, "samples": len(orbit), "energy_drift": drift, "flags": orbit.flags,
                      "outputs": run.files}, default=str))
    return EXIT_OK


def cmd_normal_form(cfg: dict) -> int:
    from .normalform import normal_form

    nfc = cfg["normal_form"]
    a, b = Fraction(str(nfc["a"])), Fraction(str(nfc["b"]))
    try:
        nf = normal_form(a, b, int(nfc["N"]))
    except SolveError as exc:
        print(json.dumps({"error": "solver inconsistency", "degree": exc.degree, "kind": exc.kind,
                          "monomials": exc.residual}), file=sys.stderr)
        return EXIT_SOLVER
    rep = nf.report()
    run = Run(cfg, "normal-form")
    run.write("normal-form", ".json", json.dumps(rep, indent=2) + "\n")
    run.manifest()
    print(json.dumps(rep, indent=2))
    return EXIT_OK if nf.residual_ok else EXIT_CHECK


def cmd_nondegen(cfg: dict) -> int:
    from .nondegen import degeneracy_locus, degeneracy_scan, isoenergetic_det, kolmogorov_det, rho_expansion
    from .normalform import normal_form

    nfc, nd = cfg["normal_form"], cfg["nondegen"]
    n = int(nd.get("n", cfg["model"].get("n", 1)))
    try:
        nf = normal_form(Fraction(str(nfc["a"])), Fraction(str(nfc["b"])), 4)
    except SolveError as exc:
        print(json.dumps({"error": "solver inconsistency", "degree": exc.degree}), file=sys.stderr)
        return EXIT_SOLVER
    C = UnitCovector.axis(n)
    grid = np.linspace(float(nd["rho_min"]), float(nd["rho_max"]), int(nd["num"]))
    rep = degeneracy_scan(nf, grid, C, float(nd["I"]))
    run = Run(cfg, "nondegen")
    run.write("nondegen-scan", ".csv", rep.to_csv())
    zero = {"det_kolmogorov_full": str(kolmogorov_det(nf, Fraction(0), Fraction(0), C)["full"]),
            "det_isoenergetic": str(isoenergetic_det(nf, Fraction(0), Fraction(0), C)["full"])}
    exp = {w: [str(x) for x in rho_expansion(nf, w, C, order=2)] for w in ("A_V", "B_W", "A_Vperp", "B_Wperp")}
    summary = {"a": str(nf.a), "b": str(nf.b), "n": n, "rho0_exact": zero, "rho_expansion": exp,
               "zero_crossings": rep.zero_crossings, "vanishing_order": rep.vanishing_order}
    if nd.get("locus", True):
        loc = degeneracy_locus()
        summary["degeneracy_locus"] = {
            "points": [{k: str(v) for k, v in p.items()} for p in loc.points],
            "eliminated_polynomial": [str(c) for c in loc.polynomial],
            "stated_b": str(loc.remark_b),
            "consistent_with_stated_b": loc.remark_consistent,
            "status": "OPEN" if not loc.remark_consistent else "PASS",
        }
    run.write("nondegen-summary", ".json", json.dumps(summary, indent=2, default=str) + "\n")
    if cfg["output"]["figures"]:
        from .plotting import scan_plot

        scan_plot(rep.rho, {k: v for k, v in rep.columns.items()}, run.path("nondegen-scan", ".svg"))
    run.manifest()
    print(json.dumps(summary, indent=2, default=str))
    return EXIT_OK


def cmd_kam_scan(cfg: dict) -> int:
    from .kamscan import (SCAN_CONFIG, ICGrid, RescaledModel, SectionSpec, Thresholds, is_monotone,
                          torus_fraction)

    sc = cfg["scan"]
    n, g, V, pr, _ = _model(cfg)
    if not isinstance(V, TorusPotential):
        raise ConfigError("config field 'model.potential': kam-scan needs a torus potential")
    C = tuple(sc.get("C", tuple(np.eye(n)[0])))
    grid = ICGrid(C=C, dW=tuple(sc["dW"]), ds=tuple(sc["ds"]), shape=tuple(sc["shape"]))
    spec = SectionSpec(max_crossings=int(sc["max_crossings"]))
    icfg = IntegratorConfig(h=float(sc.get("h", SCAN_CONFIG.h)), newton_tol=SCAN_CONFIG.newton_tol,
                            max_steps=int(sc.get("max_steps", SCAN_CONFIG.max_steps)))
    th = Thresholds(float(sc["tol_qp"]), float(sc["tol_res"]))
    run = Run(cfg, "kam-scan")
    reports = []
    for beta in sc["betas"]:
        model = RescaledModel(float(beta), V, pr.M, g, pr.mass_profile)
        rep = torus_fraction(model, grid, spec, icfg, th, jobs=int(cfg["jobs"]),
                             keep_sections=bool(sc["keep_sections"]))
        reports.append(rep)
        tag = f"beta{beta:g}"
        run.write(f"classification-{tag}", ".csv", rep.classification_csv())
        if rep.sections is not None:
            run.write(f"section-{tag}", ".csv", rep.section_csv())
            if cfg["output"]["figures"]:
                from .plotting import section_scatter

                section_scatter(rep.sections, [c.verdict for c in rep.classifications],
                                run.path(f"section-{tag}", ".png"), title=f"beta = {beta:g}")
        print(f"beta={beta:g} fraction={rep.fraction:.4f} counts={rep.counts()}", flush=True)
    summary = {"betas": [r.beta for r in reports], "fractions": [r.fraction for r in reports],
               "counts": [r.counts() for r in reports], "monotone_nonincreasing": is_monotone(reports),
               "thresholds": {"tol_qp": th.tol_qp, "tol_res": th.tol_res,
                              "note": "calibration artifacts; no quantitative torus-measure prediction exists"}}
    run.write("kam-summary", ".json", json.dumps(summary, indent=2) + "\n")
    if cfg["output"]["figures"] and len(reports) > 1:
        from .plotting import fraction_plot

        fraction_plot(summary["betas"], summary["fractions"], run.path("kam-fractions", ".svg"))
    # wall times differ run to run, so they go to the manifest only
    run.manifest({"wall_time_per_beta": [round(r.meta["wall_time"], 2) for r in reports]})
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_verify(cfg: dict, mutate: dict | None = None, json_out: str | None = None) -> int:
    from .verify import run_verify

    rep = run_verify(mutate)
    print(rep.table())
    text = rep.to_json()
    if json_out == "-":
        print(text)
    elif json_out:
        Path(json_out).parent.mkdir(parents=True, exist_ok=True)
        Path(json_out).write_text(text + "\n")
    return EXIT_OK if rep.ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# argument parsing

def _rational(s: str) -> str:
    try:
        Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from exc
    return s


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nosekam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--no-figures", action="store_true", help="skip matplotlib output")
        sp.add_argument("--seed", type=int)
        return sp

    s = common(sub.add_parser("simulate", help="integrate one orbit and write CSV"))
    s.add_argument("--chart", choices=["nose", "rescaled", "nose-hoover"])
    s.add_argument("--n", type=int)
    s.add_argument("--sho", action="store_true", help="harmonic oscillator potential")
    s.add_argument("--cosine", type=float, metavar="AMP", help="V = AMP cos(2 pi q1)")
    s.add_argument("--T", type=float)
    s.add_argument("--M", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--t-end", type=float)
    s.add_argument("--method", choices=["midpoint", "rk"])
    s.add_argument("--state", type=_floats, help="comma-separated initial state")

    s = common(sub.add_parser("normal-form", help="solve the normal form for Omega = 1 + a d + b d^2/2"))
    s.add_argument("--a", type=_rational)
    s.add_argument("--b", type=_rational)
    s.add_argument("--N", type=int)

    s = common(sub.add_parser("nondegen", help="non-degeneracy determinants along J = rho C"))
    s.add_argument("--a", type=_rational)
    s.add_argument("--b", type=_rational)
    s.add_argument("--n", type=int)
    s.add_argument("--rho", type=_floats, metavar="MIN,MAX,NUM")

    s = common(sub.add_parser("kam-scan", help="torus fraction over an IC grid"))
    s.add_argument("--betas", type=_floats)
    s.add_argument("--grid", type=int, nargs=2, metavar=("NW", "NS"))
    s.add_argument("--max-crossings", type=int)
    s.add_argument("--jobs", type=int)

    s = common(sub.add_parser("verify", help="replay the published identities"))
    s.add_argument("--json", dest="json_out", metavar="PATH", help="write results as JSON ('-' for stdout)")
    s.add_argument("--mutate", action="append", default=[], metavar="NAME=DELTA",
                   help="perturb a solved scalar before comparison (mutation test)")
    return p


def _overrides(args) -> dict:
    o: dict = {}
    _set(o, "output.dir", getattr(args, "out", None))
    if getattr(args, "no_figures", False):
        _set(o, "output.figures", False)
    _set(o, "seed", getattr(args, "seed", None))
    cmd = args.command
    if cmd == "simulate":
        _set(o, "simulate.chart", args.chart)
        _set(o, "model.n", args.n)
        if args.sho:
            _set(o, "model.sho", {"k": 1.0})
        if args.cosine is not None:
            n = args.n or 1
            k = [1] + [0] * (n - 1)
            _set(o, "model.potential", {"dim": n, "modes": [{"k": k, "cos": args.cosine, "sin": 0.0}]})
        _set(o, "model.T", args.T)
        _set(o, "model.M", args.M)
        _set(o, "model.beta", args.beta)
        _set(o, "integrator.h", args.h)
        _set(o, "simulate.t_end", args.t_end)
        _set(o, "simulate.method", args.method)
        _set(o, "simulate.initial_state", args.state)
    elif cmd in ("normal-form", "nondegen"):
        _set(o, "normal_form.a", args.a)
        _set(o, "normal_form.b", args.b)
        if cmd == "normal-form":
            _set(o, "normal_form.N", args.N)
        else:
            _set(o, "nondegen.n", args.n)
            if args.rho:
                if len(args.rho) != 3:
                    raise ConfigError("--rho expects MIN,MAX,NUM")
                _set(o, "nondegen.rho_min", args.rho[0])
                _set(o, "nondegen.rho_max", args.rho[1])
                _set(o, "nondegen.num", int(args.rho[2]))
    elif cmd == "kam-scan":
        _set(o, "scan.betas", args.betas)
        _set(o, "scan.shape", args.grid)
        _set(o, "scan.max_crossings", args.max_crossings)
        _set(o, "jobs", args.jobs)
    return o


def _kam_defaults(cfg: dict) -> dict:
    # the scan default is the n=1 cosine model
    if "potential" not in cfg.get("model", {}) and "sho" not in cfg.get("model", {}):
        cfg = _merge(cfg, {"model": {"potential": {"dim": 1, "modes": [{"k": [1], "cos": 1.0, "sin": 0.0}]}}})
    return cfg


def _glue_negative_rationals(argv: list[str]) -> list[str]:
    """``--b -2/3`` -> ``--b=-2/3``; argparse only recognises plain negative numbers."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in ("--a", "--b"):
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and nxt[1:2].isdigit():
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_glue_negative_rationals(argv))
    try:
        file_cfg = load_config(args.config)
        cfg = _merge(_merge(DEFAULTS, file_cfg), _overrides(args))
        if args.command == "kam-scan":
            cfg = _kam_defaults(cfg)
        cfg["subcommand"] = args.command
        validate(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "normal-form":
            return cmd_normal_form(cfg)
        if args.command == "nondegen":
            return cmd_nondegen(cfg)
        if args.command == "kam-scan":
            return cmd_kam_scan(cfg)
        mutate = {}
        for m in args.mutate:
            name, _, delta = m.partition("=")
            if not delta:
                raise ConfigError(f"--mutate expects NAME=DELTA, got {m!r}")
            mutate[name.strip()] = Fraction(delta)
        return cmd_verify(cfg, mutate, args.json_out)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
