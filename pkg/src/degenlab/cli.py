"""Command-line front end: INI config in, CSV out.

    degenlab <subcommand> CONFIG [--out PATH] [--precision P] [--set section.key=value ...]

Exit status: 0 success, 1 precondition failure or withheld verdict, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coefficients as cf
from . import geometry as geo
from . import grid as gr
from . import mollifier as mo
from . import spectral as spc
from . import uniqueness as un

SUBCOMMANDS = ("geometry", "conditions", "mollifier", "hardy", "rellich", "classify", "deficiency",
               "evolve", "witness", "scan")
SCANNABLE = ("geometry", "hardy", "rellich", "classify", "deficiency")

HEADERS = {
    "geometry": ["domain", "d", "d_H", "curvature_bound", "r", "samples", "gamma", "max_deviation"],
    "conditions": ["domain", "d", "delta", "r", "sup_A", "sup_B", "sup_C", "holds_A", "holds_B", "holds_C"],
    "mollifier": ["n", "u", "zeta", "zeta_prime", "zeta_double_prime"],
    "hardy": ["domain", "d", "d_H", "delta", "r", "epsilon", "cells", "numeric_min", "theoretical_bound",
              "limiting_constant", "verdict"],
    "rellich": ["domain", "d", "d_H", "delta", "r", "epsilon", "cells", "numeric_min", "theoretical_bound",
                "limiting_constant", "verdict"],
    "classify": ["domain", "d", "d_H", "delta", "markov_threshold", "l2_threshold", "verdict", "provenance"],
    "deficiency": ["domain", "delta", "L", "weyl_verdict", "rungs", "n_plus", "n_minus", "classification"],
    "evolve": ["t", "mass", "energy"],
    "witness": ["delta", "epsilon", "l2_partial", "energy_partial", "verdict"],
}


class ConfigError(ValueError):
    pass


# config ----------------------------------------------------------------------------


@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    precision: int = 12

    def get(self, section, key, default=None, kind=str):
        if not self.parser.has_option(section, key):
            if default is None:
                raise ConfigError(f"missing field [{section}] {key}")
            raw = default
        else:
            raw = self.parser.get(section, key)
        try:
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def floats(self, section, key, default=None):
        raw = self.get(section, key, default if default is None else ",".join(map(str, default)))
        try:
            return [float(v) for v in str(raw).replace(";", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def canonical(self) -> str:
        buf = io.StringIO()
        for sec in sorted(self.parser.sections()):
            buf.write(f"[{sec}]\n")
            for k in sorted(self.parser.options(sec)):
                buf.write(f"{k}={self.parser.get(sec, k).strip()}\n")
        return buf.getvalue()

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def with_value(self, section, key, value) -> "RunConfig":
        p = configparser.ConfigParser()
        p.read_string(self.canonical())
        if not p.has_section(section):
            p.add_section(section)
        p.set(section, key, value)
        return RunConfig(p, self.precision)


def _parse_error(path, exc) -> str:
    if isinstance(exc, configparser.MissingSectionHeaderError):
        return f"{path}, line {exc.lineno}: expected a [section] header, got {exc.line.strip()!r}"
    if isinstance(exc, configparser.DuplicateOptionError):
        return f"{path}, line {exc.lineno}: duplicate field [{exc.section}] {exc.option}"
    if isinstance(exc, configparser.DuplicateSectionError):
        return f"{path}, line {exc.lineno}: duplicate section [{exc.section}]"
    if isinstance(exc, configparser.ParsingError):
        return "; ".join(f"{path}, line {n}: cannot parse {line}" for n, line in exc.errors)
    return f"{path}: {exc}"


def load_config(path: str, overrides=()) -> RunConfig:
    p = configparser.ConfigParser()
    try:
        with open(path) as fh:
            p.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(_parse_error(path, exc)) from None
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, field = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if not p.has_section(section):
            p.add_section(section)
        p.set(section, field, value)
    return RunConfig(p)


def domain_from(cfg: RunConfig) -> geo.DomainSpec:
    v = cfg.get("domain", "variant")
    d = cfg.get("domain", "d", "1", int)
    if v == "interval":
        a, b = cfg.floats("domain", "endpoints", (0.0, 1.0))
        side = cfg.get("domain", "degenerate", "left")
        deg = {"left": (True, False), "right": (False, True), "both": (True, True)}.get(side)
        if deg is None:
            raise ConfigError(f"[domain] degenerate = {side!r}: expected left, right or both")
        return geo.DomainSpec.interval(a, b, deg)
    if v == "punctured":
        return geo.DomainSpec.punctured(d)
    if v in ("ball_interior", "ball_exterior"):
        R = cfg.get("domain", "radius", "1.0", float)
        return getattr(geo.DomainSpec, v)(d, R)
    if v == "convex_product":
        return geo.DomainSpec.convex_product(d, cfg.get("domain", "sub_dim", kind=int),
                                             cfg.get("domain", "radius", "1.0", float))
    if v == "lattice":
        return geo.DomainSpec.lattice(d, cfg.get("domain", "spacing", "1.0", float))
    raise ConfigError(f"[domain] variant = {v!r} is not a known domain class")


def field_from(cfg: RunConfig, spec: geo.DomainSpec) -> cf.CoefficientField:
    delta = cfg.get("coefficient", "delta", kind=float)
    kind = cfg.get("coefficient", "profile", "constant")
    coeffs = cfg.floats("coefficient", "coeffs", (1.0,))
    prof = cf.Profile(kind, tuple(coeffs))
    if kind == "constant":
        mu = lam = coeffs[0]
    elif kind == "angular":
        mu, lam = coeffs[0] - abs(coeffs[1]), coeffs[0] + abs(coeffs[1])
    else:
        mu = lam = None
    mu = cfg.get("coefficient", "mu", str(mu) if mu is not None else None, float)
    lam = cfg.get("coefficient", "lambda", str(lam) if lam is not None else None, float)
    pert = None
    if cfg.parser.has_option("coefficient", "perturbation_gamma"):
        b = cfg.get("coefficient", "perturbation_b", "1.0")
        rows = [[float(x) for x in row.split(",")] for row in b.split(";")]
        B = rows[0][0] * np.eye(spec.d) if len(rows) == 1 and len(rows[0]) == 1 else np.array(rows)
        pert = cf.Perturbation.from_array(B, cfg.get("coefficient", "perturbation_gamma", kind=float))
    return cf.CoefficientField(delta, prof, mu, lam, pert,
                               cfg.get("coefficient", "interior_floor", "1.0", float))


def layer_from(cfg: RunConfig) -> geo.LayerSpec:
    return geo.LayerSpec(cfg.get("layer", "r", "0.1", float), cfg.get("layer", "s", "0.0", float))


def operator_from(cfg: RunConfig, spec, fld, outer_default="dirichlet"):
    r = layer_from(cfg).r
    g = gr.grid_for(spec, cfg.get("grid", "epsilon", "1e-6", float), cfg.get("grid", "L", str(r), float),
                    cfg.get("grid", "cells", "512", int), cfg.get("grid", "grading_exponent", "1.0", float),
                    cfg.get("grid", "grading", "geometric"))
    bc = (cfg.get("grid", "bc_inner", "dirichlet"), cfg.get("grid", "bc_outer", outer_default))
    return gr.assemble(fld, g, bc)


# subcommands ---------------------------------------------------------------------


def _d_H(spec):
    return 0 if spec.variant == "interval" else spec.hausdorff_dim


def run_geometry(cfg):
    spec, layer = domain_from(cfg), layer_from(cfg)
    n = cfg.get("run", "samples", "1000", int)
    tb = geo.verify_trace_bound(spec, layer, n)
    return [[spec.name, spec.d, _d_H(spec), spec.curvature_bound, layer.r, n, tb.gamma, tb.max_deviation]]


def run_conditions(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    ladder = cfg.floats("run", "r_ladder", None) if cfg.parser.has_option("run", "r_ladder") else None
    rep = cf.verify_degeneracy_conditions(fld, spec, ladder, cfg.get("run", "samples", "400", int),
                                          cfg.get("run", "tolerance", "1e-8", float))
    return [[spec.name, spec.d, fld.delta, g.r, g.A, g.B, g.C, rep.A, rep.B, rep.C] for g in rep.rungs]


def run_mollifier(cfg):
    n = cfg.get("run", "n", "100", int)
    m = mo.Mollifier(n)
    us = np.linspace(0.0, cfg.get("run", "u_max", "1.2", float), cfg.get("run", "points", "25", int))
    return [[n, u, m.zeta(u), m.zeta_prime(u), m.zeta_double_prime(u)] for u in us]


def _quotient_row(report, spec, fld, r, lim, bound):
    if not report.applicable:
        verdict = "non_applicable"
    else:
        verdict = "consistent" if report.numeric_min >= bound - 1e-6 else "violated"
    return [spec.name, spec.d, _d_H(spec), fld.delta, r, report.epsilon, report.cells, report.numeric_min,
            bound if bound is not None else "", lim, verdict]


def run_hardy(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    layer = layer_from(cfg)
    rep = spc.hardy_min(operator_from(cfg, spec, fld), fld, spec, layer, ladder=False)
    lim = (spec.d - _d_H(spec) + fld.delta - 2) ** 2 / 4
    return [_quotient_row(rep, spec, fld, layer.r, lim, rep.theoretical_bound)]


def run_rellich(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    layer = layer_from(cfg)
    rep = spc.rellich_min(operator_from(cfg, spec, fld), fld, spec, layer, ladder=False)
    return [_quotient_row(rep, spec, fld, layer.r, rep.limiting_constant, rep.theoretical_bound)]


def run_classify(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    v = un.classify(spec, fld)
    return [[spec.name, spec.d, _d_H(spec), fld.delta, v.markov_threshold, v.l2_threshold, v.verdict,
             v.provenance]]


def run_deficiency(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    L = cfg.get("grid", "L", "1.0", float)
    w = spc.weyl_classify(fld, L)
    res = spc.deficiency_indices(fld, L, cfg.get("run", "max_rungs", "1000", int))
    return [[spec.name, fld.delta, L, w.verdict, res.rungs, res.n_plus, res.n_minus,
             res.endpoint_classification]]


def run_evolve(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    op = operator_from(cfg, spec, fld, outer_default="neumann")
    phi0 = un.bump(op.t, cfg.get("run", "center", "0.3", float), cfg.get("run", "width", "0.1", float))
    tr = un.evolve(op, phi0, cfg.get("run", "dt", "1e-3", float), cfg.get("run", "T", "0.1", float),
                   cfg.get("run", "scheme", "implicit_euler"))
    return [[t, m, e] for t, m, e in zip(tr.times, tr.masses, tr.energies)]


def run_witness(cfg):
    spec = domain_from(cfg)
    fld = field_from(cfg, spec)
    cut = un.Cutoff(cfg.get("run", "chi_s", "0.25", float), cfg.get("run", "chi_r", "0.5", float))
    rep = un.witness(spec, fld, cutoff=cut)
    return [[fld.delta, e, l, en, rep.verdict]
            for e, l, en in zip(rep.epsilons, rep.l2_partials, rep.energy_partials)]


RUNNERS = {name: globals()[f"run_{name}"] for name in HEADERS}


def _scan_row(args):
    target, cfg = args
    try:
        return "ok", RUNNERS[target](cfg)[0]
    except un.VerdictWithheld as exc:
        return "withheld", str(exc)


def run_scan(cfg, jobs=1):
    target = cfg.get("scan", "command", "classify")
    if target not in SCANNABLE:
        raise ConfigError(f"[scan] command = {target!r}: scannable commands are {', '.join(SCANNABLE)}")
    param = cfg.get("scan", "parameter", "coefficient.delta")
    section, _, key = param.partition(".")
    values = [v.strip() for v in cfg.get("scan", "values").split(",") if v.strip()]
    nums = [float(v) for v in values]
    if not all(np.isfinite(nums)):
        raise ConfigError("[scan] values must be finite")
    if nums != sorted(nums):
        raise ConfigError("[scan] values must be sorted")
    cfgs = [cfg.with_value(section, key, v) for v in values]
    work = [(target, c) for c in cfgs]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_scan_row, work))
    else:
        results = [_scan_row(w) for w in work]
    rows, hashes = [], []
    width = len(HEADERS[target])
    for c, v, (status, row) in zip(cfgs, values, results):
        if status == "withheld":
            row = [""] * (width - 1) + ["withheld"]
        rows.append([param, v] + row)
        hashes.append(c.hash)
    return rows, hashes, ["parameter", "value"] + HEADERS[target]


# output -------------------------------------------------------------------------


def _fmt(x, precision):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{precision}g}"
    return str(x)


def render(header, rows, hashes, precision) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config_hash"] + header)
    for h, row in zip(hashes, rows):
        w.writerow([h] + [_fmt(x, precision) for x in row])
    return buf.getvalue()


def build_parser():
    p = argparse.ArgumentParser(prog="degenlab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config", help="INI configuration file")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--precision", type=int, help="significant digits for floats (default 12)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config field")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for scan")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        precision = args.precision or cfg.get("run", "precision", "12", int)
        if args.subcommand == "scan":
            rows, hashes, header = run_scan(cfg, args.jobs)
        else:
            rows = RUNNERS[args.subcommand](cfg)
            hashes, header = [cfg.hash] * len(rows), HEADERS[args.subcommand]
    except (spc.ConvergenceError, spc.IntegrationError, un.SolverBreakdown) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, configparser.Error) as exc:
        # domain/field/grid preconditions, withheld verdicts and config errors
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = render(header, rows, hashes, precision)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
