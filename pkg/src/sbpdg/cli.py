"""Config-driven experiment runner.

Config files are TOML. A minimal file is just ``problem = "advection"``;
everything else falls back to the published setups. Recognised layout::

    problem = "advection"          # or "euler"

    [scheme]                       # scalars shared by every run
    M = 8
    p_map = 1                      # euler default: p_map = p
    T = 1.0
    beta = 2.5e-3
    L = 1.0
    split = "alternating"          # or "main" / "anti"
    speed = 1.4142135623730951     # advection
    angle = 0.7853981633974483
    mach = 0.4                     # euler
    theta = 0.7853981633974483
    r = 1.4

    [matrix]                       # expanded as a cartesian product
    p = [2, 3, 4]
    variants = ["QuadratureI", "QuadratureII", "Collocation"]
    c = ["c_DG", "c_plus"]         # presets or numbers
    lam = [0.0, 1.0]               # advection only
    forms = ["strong_fr", "weak_filtered"]   # strong form first, weak second

    [output]
    dir = "results"
    step_log_every = 0             # > 0 writes per-step CSV histories
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from itertools import product
from math import pi, sqrt
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import checks, diagnostics
from .mesh import dump_mesh
from .operators import VARIANTS, build_operators, dump_operators, resolve_c
from .solver import FORMS, Discretization, SchemeConfig, build_mesh, initial_condition, run_scheme

log = logging.getLogger("sbpdg")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_UNSTABLE = 0, 2, 3, 4

EQUATION_NAMES = {"advection": ("u",), "euler": ("rho", "rho_v1", "rho_v2", "e")}

_SCHEME_KEYS = {"M": int, "p_map": int, "T": float, "beta": float, "L": float, "split": str,
                "speed": float, "angle": float, "mach": float, "theta": float, "r": float}
_MATRIX_KEYS = {"p", "variants", "c", "lam", "forms"}
_OUTPUT_KEYS = {"dir", "step_log_every"}

# scaled-down Euler case used unless --full is given
DESK_EULER = dict(M=8, p=(2,))


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str
    scheme: dict = field(default_factory=dict)   # explicit SchemeConfig overrides
    p: tuple = (2, 3, 4)
    variants: tuple = VARIANTS
    c: tuple = ("c_DG", "c_plus")
    lam: tuple = (0.0, 1.0)
    forms: tuple = ("strong_fr", "weak_filtered")
    output_dir: str = "results"
    step_log_every: int = 0

    def scheme_config(self, p, variant, c, lam, form) -> SchemeConfig:
        kw = dict(self.scheme)
        kw.update(p=p, variant=variant, c=c, form=form)
        if self.problem == "advection":
            kw["lam"] = lam
        return SchemeConfig.defaults(self.problem, **kw)

    def combinations(self):
        lams = self.lam if self.problem == "advection" else (1.0,)
        return list(product(self.p, self.variants, self.c, lams))

    def desk_scale(self):
        """The reduced Euler case: M=8, p=2, p_map=2."""
        scheme = dict(self.scheme, M=DESK_EULER["M"])
        scheme.pop("p_map", None)
        return replace(self, scheme=scheme, p=DESK_EULER["p"])


def _as_tuple(value, key):
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"[matrix] {key}: empty list")
        return tuple(value)
    return (value,)


def _coerce_c(value):
    if isinstance(value, str):
        if value not in ("c_DG", "c_plus"):
            raise ConfigError(f"[matrix] c: unknown preset {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[matrix] c: expected a preset name or a number, got {value!r}")
    return float(value)


def config_from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    problem = data.pop("problem", None)
    if problem not in ("advection", "euler"):
        raise ConfigError(f"problem: expected 'advection' or 'euler', got {problem!r}")
    sections = {"scheme": data.pop("scheme", {}), "matrix": data.pop("matrix", {}),
                "output": data.pop("output", {})}
    if data:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(data))}")
    for name, sec in sections.items():
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")

    scheme = {}
    for key, value in sections["scheme"].items():
        if key not in _SCHEME_KEYS:
            raise ConfigError(f"[scheme] unknown key {key!r}")
        try:
            scheme[key] = _SCHEME_KEYS[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"[scheme] {key}: cannot interpret {value!r}") from None

    cfg = RunConfig(problem, scheme)
    if problem == "euler":
        cfg.lam = (1.0,)
    mat = sections["matrix"]
    for key in mat:
        if key not in _MATRIX_KEYS:
            raise ConfigError(f"[matrix] unknown key {key!r}")
    if "p" in mat:
        cfg.p = tuple(int(v) for v in _as_tuple(mat["p"], "p"))
    if "variants" in mat:
        cfg.variants = _as_tuple(mat["variants"], "variants")
        for v in cfg.variants:
            if v not in VARIANTS:
                raise ConfigError(f"[matrix] variants: unknown variant {v!r}")
    if "c" in mat:
        cfg.c = tuple(_coerce_c(v) for v in _as_tuple(mat["c"], "c"))
    if "lam" in mat:
        if problem != "advection":
            raise ConfigError("[matrix] lam only applies to advection")
        cfg.lam = tuple(float(v) for v in _as_tuple(mat["lam"], "lam"))
    if "forms" in mat:
        forms = _as_tuple(mat["forms"], "forms")
        if len(forms) != 2:
            raise ConfigError("[matrix] forms: give exactly two forms, strong then weak")
        for f in forms:
            if f not in FORMS:
                raise ConfigError(f"[matrix] forms: unknown form {f!r}")
        cfg.forms = forms

    out = sections["output"]
    for key in out:
        if key not in _OUTPUT_KEYS:
            raise ConfigError(f"[output] unknown key {key!r}")
    cfg.output_dir = str(out.get("dir", cfg.output_dir))
    cfg.step_log_every = int(out.get("step_log_every", 0))

    # every expanded combination must be a valid scheme
    for p, variant, c, lam in cfg.combinations():
        for form in cfg.forms:
            try:
                cfg.scheme_config(p, variant, c, lam, form)
            except ValueError as exc:
                raise ConfigError(f"invalid combination (p={p}, variant={variant}, c={c}, "
                                  f"lam={lam}, form={form}): {exc}") from None
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_mapping(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# running


def _c_label(c):
    return c if isinstance(c, str) else f"{c:g}"


def run_pair(run: RunConfig, p, variant, c, lam, ops=None, mesh=None, step_dir=None):
    """Run the strong and weak forms of one combination; returns one record per equation."""
    results = []
    for form in run.forms:
        cfg = run.scheme_config(p, variant, c, lam, form)
        disc = Discretization(cfg.law(), ops, mesh, cfg.form, cfg.lam)
        hook = None
        if step_dir is not None and run.step_log_every > 0:
            name = f"{run.problem}_p{p}_{variant}_{_c_label(c)}_lam{lam:g}_{form}.csv"
            hook = diagnostics.StepLog(disc, os.path.join(step_dir, name), run.step_log_every)
        try:
            disc, state0, res = run_scheme(cfg, disc, hook=hook)
        finally:
            if hook is not None:
                hook.close()
        results.append((disc, state0, res))

    (disc_s, u0_s, res_s), (disc_w, u0_w, res_w) = results
    names = EQUATION_NAMES[run.problem]
    equiv = cons_s = cons_w = en_s = en_w = None
    if res_s.stable and res_w.stable:
        equiv = diagnostics.l2_difference(res_s.state.u, res_w.state.u, disc_s)
    if res_s.stable:
        cons_s = (diagnostics.conservation_functional(res_s.state.u, disc_s)
                  - diagnostics.conservation_functional(u0_s.u, disc_s))
    if res_w.stable:
        cons_w = (diagnostics.conservation_functional(res_w.state.u, disc_w)
                  - diagnostics.conservation_functional(u0_w.u, disc_w))
    if run.problem == "advection" and disc_s.affine:
        if res_s.stable:
            en_s = (diagnostics.energy_norm_squared(res_s.state.u, disc_s)
                    - diagnostics.energy_norm_squared(u0_s.u, disc_s))
        if res_w.stable:
            en_w = (diagnostics.energy_norm_squared(res_w.state.u, disc_w)
                    - diagnostics.energy_norm_squared(u0_w.u, disc_w))

    records = []
    for e, name in enumerate(names):
        label = f"{lam:g}" if run.problem == "advection" else name
        rec = diagnostics.DiagnosticsRecord(
            run.problem, p, variant, _c_label(c), label,
            stable_strong=res_s.stable, stable_weak=res_w.stable,
            failed_step_strong=res_s.failed_step, failed_step_weak=res_w.failed_step)
        if equiv is not None:
            rec.equivalence = float(equiv[e])
        if cons_s is not None:
            rec.conservation_strong = float(cons_s[e])
        if cons_w is not None:
            rec.conservation_weak = float(cons_w[e])
        if en_s is not None:
            rec.energy_strong = en_s
        if en_w is not None:
            rec.energy_weak = en_w
        records.append(rec)
    return records


@dataclass
class ExperimentOutcome:
    status: int
    records: list
    tables: list
    checks: list
    unexpected: list
    note: Optional[str] = None


def run_experiments(run: RunConfig, check=False, full=False, dump_operators_dir=None,
                    dump_mesh_dir=None) -> ExperimentOutcome:
    if run.problem == "euler" and not full:
        log.info("euler: running the reduced case (M=8, p=2, p_map=2); pass --full for the "
                 "complete matrix")
        run = run.desk_scale()

    ops_cache, mesh_cache = {}, {}
    combos = run.combinations()
    if dump_operators_dir:
        for p, variant, c, _ in combos:
            if (variant, p, c) not in ops_cache:
                ops_cache[variant, p, c] = build_operators(variant, p, resolve_c(c, p))
                dump_operators(ops_cache[variant, p, c], dump_operators_dir)
    step_dir = os.path.join(run.output_dir, "steps") if run.step_log_every > 0 else None

    records = []
    for p, variant, c, lam in combos:
        key = (variant, p, c)
        if key not in ops_cache:
            ops_cache[key] = build_operators(variant, p, resolve_c(c, p))
        cfg0 = run.scheme_config(p, variant, c, lam, run.forms[0])
        mkey = (cfg0.M, cfg0.L, cfg0.p_map, cfg0.split)
        if mkey not in mesh_cache:
            mesh_cache[mkey] = build_mesh(cfg0)
        if dump_mesh_dir:
            disc = Discretization(cfg0.law(), ops_cache[key], mesh_cache[mkey], cfg0.form, cfg0.lam)
            dump_mesh(mesh_cache[mkey], disc.conn,
                      os.path.join(dump_mesh_dir, f"p{p}_{variant}_pmap{cfg0.p_map}"))
        log.info("running %s p=%d %s c=%s lam=%g", run.problem, p, variant, _c_label(c), lam)
        recs = run_pair(run, p, variant, c, lam, ops_cache[key], mesh_cache[mkey], step_dir)
        for r in recs:
            if not r.stable:
                log.info("  unstable (failed steps %s / %s)", r.failed_step_strong,
                         r.failed_step_weak)
                break
        records.extend(recs)

    tables = diagnostics.emit_tables(records, run.output_dir,
                                     tables=[(run.problem, p) for p in run.p])
    unexpected = checks.unexpected_instabilities(records)
    results = []
    if check:
        results = (checks.check_advection(records) if run.problem == "advection"
                   else checks.check_euler(records))
    if unexpected:
        status = EXIT_UNSTABLE
    elif check and not all(r.passed for r in results):
        status = EXIT_CHECK
    else:
        status = EXIT_OK
    return ExperimentOutcome(status, records, tables, results, unexpected)


def build_parser():
    parser = argparse.ArgumentParser(prog="sbpdg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment matrix from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--output-dir", default=None, help="overrides [output] dir")
    r.add_argument("--check", action="store_true", help="test results against the acceptance thresholds")
    r.add_argument("--full", action="store_true", help="full-size Euler matrix (slow)")
    r.add_argument("--dump-operators", metavar="DIR", default=None)
    r.add_argument("--dump-mesh", metavar="DIR", default=None)
    r.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        run = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        run.output_dir = args.output_dir
    outcome = run_experiments(run, check=args.check, full=args.full,
                              dump_operators_dir=args.dump_operators, dump_mesh_dir=args.dump_mesh)
    for path in outcome.tables:
        print(f"wrote {path}")
    for res in outcome.checks:
        print(res.line())
    for tag in outcome.unexpected:
        print(f"unexpected instability: {tag}", file=sys.stderr)
    if args.check:
        n_ok = sum(r.passed for r in outcome.checks)
        print(f"{n_ok}/{len(outcome.checks)} checks passed")
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
