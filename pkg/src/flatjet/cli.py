"""Batch command-line entry point: ``flatjet {jets,compat,synthesize,simulate,norms,bench}``.

Every run writes ``result.json`` (validated against the bundled schema) and
command-specific CSV files under ``--out``. Exit status: 0 pass, 2 flagged
numerical failure, 1 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import FlatjetError, IllPosedError, SpecError, StateError
from .model import (AnalyticState, PdeSpec, certify_state, make_preset, spec_from_json,
                    spec_to_json, state_from_expressions, zero_state)
from .scalars import GaussianRational

COMMANDS = ("jets", "compat", "synthesize", "simulate", "norms", "bench")
SCHEMA_VERSION = "1"
EXIT_PASS, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
PLOT_KINDS = ("controls", "heatmap", "residual_curve", "envelope")
USAGE_ERRORS = (SpecError, StateError, IllPosedError)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    preset: str | None = None
    spec: str | None = None
    state: str | None = None
    y0: str = "zero"
    y1: str = "zero"
    n_max: int | None = None
    k_max: int | None = None
    Q: int = 32
    T: float = 1.0
    tol: float | None = None
    out: str = "flatjet_out"
    seed: int = 0
    exact: bool = False
    R: float = 20.0
    Rp: float = 5.0
    mu: float | None = None
    nx: int = 201
    dt: float = 1e-4
    cases: list = field(default_factory=list)
    samples: int = 100
    sizes: list = field(default_factory=lambda: [16, 32, 64])

    def validate(self) -> None:
        jsonschema.validate(self.to_json(), load_schema("config"))
        for name in ("n_max", "k_max", "Q"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name.replace('_', '')} must be at least 1")
        if self.command not in ("norms", "bench") and not (self.preset or self.spec):
            raise UsageError(f"{self.command} needs --preset or --spec")

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        jsonschema.validate(doc, load_schema("config"))
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


# ---------------------------------------------------------------- JSON / CSV output

def load_schema(name: str) -> dict:
    text = resources.files("flatjet").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def fmt_number(v) -> str:
    if isinstance(v, (Fraction, GaussianRational)):
        return str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{fmt_number(v.real)}{'+' if v.imag >= 0 else '-'}{fmt_number(abs(v.imag))}j"
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _plain(obj):
    """Recursively convert to JSON-native values; non-finite floats become null."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (Fraction, GaussianRational)):
        return str(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    obj = _plain(obj) if _level == 0 else obj
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = format(obj, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if not obj:
        return "[]"
    if all(not isinstance(v, (dict, list)) for v in obj):
        return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
    return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt_number(v) for v in row])
    return path


def write_result(out: Path, cfg: RunConfig, status: str, code: int, result=None, error=None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "status": status,
           "exit_code": code, "config": cfg.to_json(), "result": result}
    if error is not None:
        doc["error"] = error
    doc = _plain(doc)
    jsonschema.validate(doc, load_schema("result"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(dumps(doc) + "\n")
    return doc


# ---------------------------------------------------------------- inputs

def load_spec(cfg: RunConfig) -> PdeSpec:
    if cfg.spec:
        path = Path(cfg.spec)
        if not path.exists():
            raise UsageError(f"spec file not found: {path}")
        return spec_from_json(path.read_text())
    return make_preset(cfg.preset)


def _parse_scalar(v):
    if isinstance(v, str):
        if "j" in v:
            return complex(v)
        return Fraction(v)
    if isinstance(v, dict):
        return GaussianRational(Fraction(v.get("re", 0)), Fraction(v.get("im", 0)))
    return v


def parse_state(src: str | None, spec: PdeSpec, n_cut: int, R: float) -> AnalyticState:
    """``zero``, a JSON file, or ``;``-separated expressions in ``x`` (one per component)."""
    if src is None:
        raise UsageError("a state is required (--state / --y0 / --y1)")
    if src == "zero":
        return zero_state(spec.N, n_cut, R, exact=True, complex_kind=spec.complex_kind)
    path = Path(src)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise UsageError(f"state file not found: {path}")
        doc = json.loads(path.read_text())
        R = float(doc.get("R", R))
        if "components" in doc:
            comps = [[_parse_scalar(v) for v in c] for c in doc["components"]]
            comps = [c + [0] * (n_cut + 1 - len(c)) for c in comps]
            return _pad_components(certify_state(comps, R), spec.N, R)
        exprs = doc.get("exprs")
        if not exprs:
            raise UsageError(f"state file {path} needs 'components' or 'exprs'")
    else:
        exprs = [e.strip() for e in src.split(";")]
    exprs = list(exprs) + ["0"] * (spec.N - len(exprs))
    if len(exprs) != spec.N:
        raise UsageError(f"{len(exprs)} state components for time order {spec.N}")
    try:
        return state_from_expressions(exprs, n_cut, R)
    except Exception as exc:  # sympy parse errors
        raise UsageError(f"cannot parse state {src!r}: {exc}") from exc


def _pad_components(Y: AnalyticState, N: int, R: float) -> AnalyticState:
    if Y.N == N:
        return Y
    if Y.N > N:
        raise UsageError(f"{Y.N} state components for time order {N}")
    zero = [0] * (Y.n_cut + 1)
    return certify_state(list(Y.components) + [zero] * (N - Y.N), R)


# ---------------------------------------------------------------- plot data

def emit_plot_data(result, kind: str, out_dir, x_grid=None) -> list[Path]:
    """CSV series for external plotting from a synthesis result (or a bare field)."""
    from .field import SpatialField, eval_grid, residual
    from .synth import SynthesisResult, controls_table

    if kind not in PLOT_KINDS:
        raise SpecError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fld = result.field if isinstance(result, SynthesisResult) else result
    if not isinstance(fld, SpatialField):
        raise SpecError("plot data needs a synthesis result or a spatial field")
    if kind == "controls":
        if not isinstance(result, SynthesisResult):
            raise SpecError("control plots need a synthesis result")
        paths = []
        for c in result.spec.controlled:
            header, rows = controls_table(result, c)
            paths.append(write_csv(out / f"control_x{c}.csv", header, rows))
        return paths
    if kind == "heatmap":
        x = np.linspace(-1.0, 1.0, 41) if x_grid is None else np.asarray(x_grid, float)
        vals = eval_grid(fld, x, 0, 0)
        header = ["x"] + [fmt_number(t) for t in fld.t_nodes]
        parts = [("re", vals.real), ("im", vals.imag)] if np.iscomplexobj(vals) else [("", vals)]
        paths = []
        for tag, arr in parts:
            name = f"heatmap_{tag}.csv" if tag else "heatmap.csv"
            paths.append(write_csv(out / name, header, ([xi, *row] for xi, row in zip(x, arr))))
        return paths
    if kind == "residual_curve":
        x = None if x_grid is None else np.asarray(x_grid, float)
        top = residual(fld, x).order
        rows = []
        for K in range(top + 1):
            rep = residual(fld, x, order=K)
            rows.append([K, rep.max_abs, rep.predicted_tail, rep.rounding_floor])
        return [write_csv(out / "residual_curve.csv", ["order", "max_abs", "predicted_tail",
                                                        "rounding_floor"], rows)]
    # jet magnitude against the factorial envelope: rows k, columns n
    lam = fld.lam
    ent = np.where(fld.mask[None], np.abs(np.nan_to_num(fld.entries, nan=0.0)), 0.0)
    mags = ent.max(axis=0)
    rows = []
    for k in range(fld.k_max + 1):
        row = []
        for n in range(fld.n_max + 1):
            if not fld.mask[n, k]:
                row.append("nan")
            elif mags[n, k] == 0:
                row.append("-inf")
            else:
                row.append((math.log(mags[n, k]) - math.lgamma(k + lam * n + 1)) / math.log(10))
        rows.append(row)
    return [write_csv(out / "envelope.csv", [f"n={n}" for n in range(fld.n_max + 1)], rows)]


# ---------------------------------------------------------------- commands

def _cmd_jets(cfg: RunConfig, out: Path):
    from .jets import JetBoundParams, certify_jet_bound, required_state_length, time_jets_from_state

    spec = load_spec(cfg)
    n_max = cfg.n_max or 4
    k_max = cfg.k_max or spec.M - 1
    Y = parse_state(cfg.state, spec, required_state_length(spec, n_max, k_max) - 1, cfg.R)
    jet = time_jets_from_state(spec, Y, n_max, k_max, exact=True if cfg.exact else None)
    mask = jet.known_mask()
    rows = [[n] + [jet.entries[n, k] if mask[n, k] else "" for k in range(k_max + 1)]
            for n in range(n_max + 1)]
    write_csv(out / "jets.csv", ["n\\k"] + [str(k) for k in range(k_max + 1)], rows)
    mu = cfg.mu if cfg.mu is not None else spec.M + 2
    params = JetBoundParams(Y.R, cfg.Rp, mu, float(spec.lam))
    Cp = certify_jet_bound(jet.to_float() if jet.exact else jet, params)
    return EXIT_PASS, {"n_max": n_max, "k_max": k_max, "exact": jet.exact,
                       "state": {"R": Y.R, "C": Y.C}, "certified_C_prime": Cp,
                       "bound_params": {"R": Y.R, "Rp": cfg.Rp, "mu": mu, "lam": float(spec.lam)},
                       "files": ["jets.csv"]}


def _cmd_compat(cfg: RunConfig, out: Path):
    from .jets import compat_check, required_state_length

    spec = load_spec(cfg)
    n_max = cfg.n_max or 8
    Y = parse_state(cfg.state, spec, required_state_length(spec, n_max, spec.M - 1) - 1, cfg.R)
    rep = compat_check(spec, Y, n_max, tol=cfg.tol if cfg.tol is not None else 1e-10,
                       exact=True if cfg.exact else None)
    return (EXIT_PASS if rep.verdict else EXIT_FAIL), rep.to_json()


def _synthesis(cfg: RunConfig, spec: PdeSpec):
    from .jets import required_state_length
    from .synth import synthesize

    n_max = cfg.n_max or 12
    k_max = cfg.k_max or 24
    n_cut = required_state_length(spec, n_max, spec.M - 1) + 2
    Y0 = parse_state(cfg.y0, spec, n_cut, cfg.R)
    Y1 = parse_state(cfg.y1, spec, n_cut, cfg.R)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = synthesize(spec, Y0, Y1, cfg.T, n_max=n_max, k_max=k_max,
                         endpoint_ceiling=cfg.tol if cfg.tol is not None else 1e-6)
    res.diagnostics["warnings"] = [str(w.message) for w in caught]
    return res, Y0, Y1


def _cmd_synthesize(cfg: RunConfig, out: Path):
    from .gevrey import trace_table

    spec = load_spec(cfg)
    res, _, _ = _synthesis(cfg, spec)
    files = []
    for kind in PLOT_KINDS:
        files += [p.name for p in emit_plot_data(res, kind, out)]
    t = res.field.t_nodes
    for name, tr in (("hat", res.hat.traces), ("tilde", res.tilde.traces), ("blend", res.K0)):
        header, rows = trace_table(tr, t, spec.N)
        files.append(write_csv(out / f"trace_{name}.csv", header, rows).name)
    doc = res.to_json()
    doc["spec"] = spec_to_json(spec)
    doc["files"] = sorted(files)
    rep = res.residual
    doc["residual_within_tail"] = bool(rep.max_abs <= 10 * rep.bound)
    ok = res.ok and doc["residual_within_tail"]
    return (EXIT_PASS if ok else EXIT_FAIL), doc


def _cmd_simulate(cfg: RunConfig, out: Path):
    from .sim import SimConfig, compare_states, l2_norm, simulate_forward

    spec = load_spec(cfg)
    sc = SimConfig(spec, nx=cfg.nx, dt=cfg.dt, T=cfg.T)
    if spec.forward_wellposed is False:
        # refuse before any synthesis work
        simulate_forward(sc, np.zeros(sc.nx))
    controls, Y1 = {}, None
    if cfg.y1 != "zero" or cfg.y0 != "zero":
        res, Y0, Y1 = _synthesis(cfg, spec)
        times = np.linspace(0.0, sc.n_steps * sc.dt, sc.n_steps + 1)
        controls = {c: res.control_at(times, c) for c in spec.controlled}
        initial = Y0
    else:
        initial = np.zeros(sc.nx)
    keep = max(1, sc.n_steps // 100)
    sim = simulate_forward(sc, initial, controls, keep_trajectory=True, keep_every=keep)
    sim.write_csv(str(out / "trajectory.csv"))
    doc = {"simulation": sim.to_json(), "files": ["trajectory.csv"]}
    code = EXIT_PASS
    if Y1 is not None:
        cmp = compare_states(sim.terminal, Y1, sim.x)
        ref = l2_norm(Y1.evaluate(sim.x), sim.x)
        rel = cmp.relative_l2(ref) if ref else cmp.l2
        tol = cfg.tol if cfg.tol is not None else 1e-2
        doc["comparison"] = {"sup": cmp.sup, "l2": cmp.l2, "relative_l2": rel, "tolerance": tol}
        code = EXIT_PASS if rel <= tol else EXIT_FAIL
    return code, doc


def _cmd_norms(cfg: RunConfig, out: Path):
    from .gevrey import INEQUALITY_CASES, check_inequalities

    cases = cfg.cases or list(INEQUALITY_CASES)
    unknown = [c for c in cases if c not in INEQUALITY_CASES]
    if unknown:
        raise UsageError(f"unknown inequality case(s) {unknown}; choose from {list(INEQUALITY_CASES)}")
    reports = [check_inequalities(c, n_samples=cfg.samples, seed=cfg.seed) for c in cases]
    rows = [[r.case, r.n_checked, r.violations, r.worst_ratio] for r in reports]
    write_csv(out / "norms.csv", ["case", "n_checked", "violations", "worst_ratio"], rows)
    ok = all(r.ok for r in reports)
    return (EXIT_PASS if ok else EXIT_FAIL), {"reports": [r.to_json() for r in reports],
                                              "files": ["norms.csv"]}


def _cmd_bench(cfg: RunConfig, out: Path):
    from . import kernels
    from .bench import run_benchmark, speedups

    rows = run_benchmark(tuple(cfg.sizes), seed=cfg.seed)
    write_csv(out / "bench.csv", ["kernel", "size", "batch", "backend", "seconds", "max_dev"],
              [[r["kernel"], r["size"], r["batch"], r["backend"], r["seconds"], r["max_dev"]]
               for r in rows])
    ok = all(r["max_dev"] <= 1e-9 * max(1.0, r["size"] ** 2) for r in rows)
    return (EXIT_PASS if ok else EXIT_FAIL), {"backend": kernels.BACKEND, "rows": rows,
                                              "speedup": speedups(rows), "files": ["bench.csv"]}


DISPATCH = {"jets": _cmd_jets, "compat": _cmd_compat, "synthesize": _cmd_synthesize,
            "simulate": _cmd_simulate, "norms": _cmd_norms, "bench": _cmd_bench}


def run(cfg: RunConfig) -> int:
    """Execute one command; always leaves a schema-valid ``result.json`` behind."""
    out = Path(cfg.out)
    try:
        cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise UsageError(f"output directory {out} is not writable")
        np.random.seed(cfg.seed)
        code, result = DISPATCH[cfg.command](cfg, out)
    except (UsageError, jsonschema.ValidationError, FileNotFoundError, *USAGE_ERRORS) as exc:
        err = {"type": type(exc).__name__, "message": str(exc).splitlines()[0],
               "details": getattr(exc, "details", {})}
        _safe_write(out, cfg, "error", EXIT_USAGE, err)
        print(f"flatjet {cfg.command}: {err['message']}", file=sys.stderr)
        return EXIT_USAGE
    except FlatjetError as exc:
        err = {"type": type(exc).__name__, "message": str(exc), "details": exc.details}
        _safe_write(out, cfg, "fail", EXIT_FAIL, err)
        print(f"flatjet {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_result(out, cfg, "pass" if code == EXIT_PASS else "fail", code, result)
    return code


def _safe_write(out: Path, cfg: RunConfig, status: str, code: int, err: dict) -> None:
    try:
        write_result(out, cfg, status, code, None, _plain(err))
    except (OSError, jsonschema.ValidationError, TypeError):
        pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flatjet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (flags override it)")
    common.add_argument("--preset")
    common.add_argument("--spec", help="custom equation JSON file")
    common.add_argument("--nmax", dest="n_max", type=int)
    common.add_argument("--kmax", dest="k_max", type=int)
    common.add_argument("--Q", type=int)
    common.add_argument("--T", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--out")
    common.add_argument("--seed", type=int)
    common.add_argument("--exact", action="store_true", default=None)
    common.add_argument("--R", type=float, help="radius attached to parsed states")
    for name in ("jets", "compat"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--state", help="'zero', JSON file, or expressions in x separated by ';'")
        if name == "jets":
            sp.add_argument("--Rp", type=float)
            sp.add_argument("--mu", type=float)
    for name in ("synthesize", "simulate"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--y0")
        sp.add_argument("--y1")
        if name == "simulate":
            sp.add_argument("--nx", type=int)
            sp.add_argument("--dt", type=float)
    sp = sub.add_parser("norms", parents=[common])
    sp.add_argument("--case", dest="cases", action="append")
    sp.add_argument("--samples", type=int)
    sp = sub.add_parser("bench", parents=[common])
    sp.add_argument("--sizes", type=int, nargs="+")
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    doc = {}
    if ns.get("config"):
        path = Path(ns["config"])
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        doc = json.loads(path.read_text())
    doc.update({k: v for k, v in ns.items() if v is not None and k != "config"})
    return RunConfig.from_json(doc)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (UsageError, jsonschema.ValidationError, json.JSONDecodeError) as exc:
        print(f"flatjet: {str(exc).splitlines()[0]}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
