"""Configuration-driven command line for bounds, verification, and sweeps.

Commands
--------
bound    evaluate the selected bound(s), one CSV row per theorem
verify   Monte Carlo discrepancy vs. bound; exit 0 on pass, 1 on violation
scan     sweep n or k, emitting one verification row (with the bound
         decomposition) per value
check    run the built-in invariant diagnostics
moments  print the moment constants of the configured model

The experiment configuration is a single JSON file; ``--seed``,
``--samples``, ``--output`` and ``--theorem`` override individual fields.
All CSV output starts with a ``# schema=1`` line and renders floats at 17
significant digits, so identical configurations reproduce byte-identical
files.  Exit codes: 0 success/pass, 1 bound or invariant violation, 2
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from . import empirics, sources
from .directions import DirectionSet, hypercube_directions, random_orthonormal
from .errors import ConfigError, ProjcltError
from .testfuncs import TestFunction, bump_testfn, cosine_testfn

SCHEMA_LINE = "# schema=1"

BOUND_COLUMNS = "theorem,n,k,lambda,term_fourth,term_third,term_mixed,total,min_branch"
VERIFY_COLUMNS = "digest,theorem,n,k,samples,estimate,ci,bound,pass"
SCAN_COLUMNS = VERIFY_COLUMNS + ",lambda,term_fourth,term_third,term_mixed,min_branch"
MOMENTS_COLUMNS = "model,abs3,fourth,abs3_max,fourth_max,mixed_4,mixed_var"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _csv(header: str, rows: list[list]) -> str:
    lines = [SCHEMA_LINE, header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Configuration

_THEOREMS = set(bounds_mod.THEOREMS)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description plus its canonical digest."""

    model: dict
    directions: dict
    test_function: dict
    theorem: object  # str or list[str]
    samples: int
    seed: int
    constants: dict
    pair: Optional[str]
    pair_samples: int
    output: Optional[str]
    digest: str

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {
            "model", "directions", "test_function", "theorem", "samples",
            "seed", "constants", "pair", "pair_samples", "output",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("model", "directions", "test_function"):
            if key not in raw or not isinstance(raw[key], dict):
                raise ConfigError(f"configuration needs a {key!r} object")
        samples = raw.get("samples", 100_000)
        seed = raw.get("seed", 0)
        if not isinstance(samples, int) or samples < 1:
            raise ConfigError(f"samples must be a positive integer, got {samples!r}")
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        constants = raw.get("constants", {})
        if not isinstance(constants, dict):
            raise ConfigError("constants must be an object with keys a, b, c")
        pair = raw.get("pair")
        if pair is not None and pair not in empirics.PAIR_KINDS:
            raise ConfigError(f"pair must be one of {empirics.PAIR_KINDS}, got {pair!r}")
        pair_samples = raw.get("pair_samples", 2000)
        digest = hashlib.sha256(
            json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:12]
        cfg = cls(
            model=raw["model"],
            directions=raw["directions"],
            test_function=raw["test_function"],
            theorem=raw.get("theorem", "T2"),
            samples=samples,
            seed=seed,
            constants=constants,
            pair=pair,
            pair_samples=pair_samples,
            output=raw.get("output"),
            digest=digest,
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"configuration file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def theorems(self) -> list[str]:
        names = self.theorem if isinstance(self.theorem, list) else [self.theorem]
        for name in names:
            if name not in _THEOREMS:
                raise ConfigError(f"unknown theorem {name!r}; choose from {sorted(_THEOREMS)}")
        return names

    def validate(self) -> None:
        names = self.theorems()
        dirs = self.directions
        dkind = dirs.get("kind")
        if dkind not in ("hypercube", "random", "file"):
            raise ConfigError(f"directions.kind must be hypercube|random|file, got {dkind!r}")
        if dkind != "file":
            for key in ("n", "k"):
                val = dirs.get(key)
                if not isinstance(val, int) or val < 1:
                    raise ConfigError(f"directions.{key} must be a positive integer")
        mkind = self.model.get("kind")
        if mkind not in (*sources.CATALOG, "independent", "exchangeable", "user"):
            raise ConfigError(f"unknown model kind {mkind!r}")
        exchangeable = mkind == "exchangeable"
        centered = bool(dirs.get("centered", False))
        for name in names:
            if name in ("T4", "T5") and not exchangeable:
                raise ConfigError(f"{name} needs an exchangeable model, got {mkind!r}")
            if name in ("T1", "T2", "T3") and exchangeable:
                raise ConfigError(f"{name} needs independent coordinates, got an exchangeable model")
            if name in ("T4", "T5") and dkind != "file" and not centered:
                raise ConfigError(f"{name} needs centered directions (directions.centered=true)")
        tf = self.test_function
        if tf.get("kind") not in ("cosine", "bump"):
            raise ConfigError(f"test_function.kind must be cosine|bump, got {tf.get('kind')!r}")

    def exchangeable_constants(self) -> bounds_mod.ExchangeableConstants:
        base = bounds_mod.DEFAULT_EXCHANGEABLE_CONSTANTS
        try:
            return bounds_mod.ExchangeableConstants(
                a=float(self.constants.get("a", base.a)),
                b=float(self.constants.get("b", base.b)),
                c=float(self.constants.get("c", base.c)),
            )
        except ProjcltError as exc:
            raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# Builders

def build_directions(cfg: ExperimentConfig) -> DirectionSet:
    spec = cfg.directions
    kind = spec["kind"]
    try:
        if kind == "hypercube":
            return hypercube_directions(
                spec["n"], spec["k"], centered=bool(spec.get("centered", False))
            )
        if kind == "random":
            return random_orthonormal(
                spec["n"], spec["k"],
                seed=int(spec.get("seed", 0)),
                centered=bool(spec.get("centered", False)),
            )
        path = spec.get("path")
        if not path:
            raise ConfigError("directions.kind=file needs a 'path'")
        try:
            return DirectionSet.load(path)
        except FileNotFoundError as exc:
            raise ConfigError(f"direction file not found: {path}") from exc
    except ConfigError:
        raise
    except ProjcltError as exc:
        raise ConfigError(f"directions: {exc}") from exc


def build_model(cfg: ExperimentConfig, n: int) -> sources.Model:
    spec = cfg.model
    kind = spec["kind"]
    try:
        if kind in sources.CATALOG:
            if kind == "two_point" and "p" in spec:
                return sources.two_point(float(spec["p"]))
            return sources.CATALOG[kind]()
        if kind == "independent":
            pattern = spec.get("pattern")
            if not isinstance(pattern, list) or not pattern:
                raise ConfigError("independent model needs a non-empty 'pattern' list")
            coords = []
            for entry in pattern:
                mk = entry.get("kind")
                if mk not in sources.CATALOG:
                    raise ConfigError(f"independent pattern entries must be catalog laws, got {mk!r}")
                if mk == "two_point" and "p" in entry:
                    coords.append(sources.two_point(float(entry["p"])))
                else:
                    coords.append(sources.CATALOG[mk]())
            tiled = [coords[i % len(coords)] for i in range(n)]
            return sources.IndependentModel(coords=tuple(tiled))
        if kind == "exchangeable":
            return sources.ExchangeableModel(population=_population(spec, n))
        raise ConfigError(f"model kind {kind!r} cannot be built from configuration")
    except ConfigError:
        raise
    except ProjcltError as exc:
        raise ConfigError(f"model: {exc}") from exc


def _population(spec: dict, n: int) -> np.ndarray:
    given = sum(key in spec for key in ("population", "population_file", "family"))
    if given != 1:
        raise ConfigError(
            "exchangeable model needs exactly one of population, population_file, family"
        )
    if "population" in spec:
        pop = sources.standardize_population(spec["population"])
    elif "population_file" in spec:
        try:
            pop = sources.load_population(spec["population_file"])
        except FileNotFoundError as exc:
            raise ConfigError(f"population file not found: {spec['population_file']}") from exc
    else:
        family = spec["family"]
        if family == "ramp":
            pop = sources.standardize_population(np.arange(1.0, n + 1.0))
        elif family == "alternating":
            if n % 2:
                raise ConfigError("alternating population needs even n")
            pop = np.tile([-1.0, 1.0], n // 2)
        else:
            raise ConfigError(f"unknown population family {family!r}")
    if pop.size != n:
        raise ConfigError(f"population has {pop.size} values but directions have n={n}")
    return pop


def build_test_function(cfg: ExperimentConfig, k: int) -> TestFunction:
    spec = cfg.test_function
    try:
        if spec["kind"] == "cosine":
            a = spec.get("a", "ones-normalized")
            if isinstance(a, str):
                if a != "ones-normalized":
                    raise ConfigError(f"unknown cosine direction token {a!r}")
                vec = np.full(k, 1.0 / math.sqrt(k))
            else:
                vec = np.asarray(a, dtype=np.float64)
                if vec.shape != (k,):
                    raise ConfigError(
                        f"cosine direction has length {vec.size}, directions have k={k}"
                    )
            return cosine_testfn(vec, phase=float(spec.get("phase", 0.0)))
        return bump_testfn(float(spec.get("radius", 2.0)), k)
    except ConfigError:
        raise
    except ProjcltError as exc:
        raise ConfigError(f"test_function: {exc}") from exc


def build_task(cfg: ExperimentConfig, theorem: str, bound_scale: float = 1.0,
               workers: Optional[int] = None) -> empirics.VerificationTask:
    ds = build_directions(cfg)
    model = build_model(cfg, ds.n)
    g = build_test_function(cfg, ds.k)
    return empirics.VerificationTask(
        ds=ds,
        model=model,
        g=g,
        theorem=theorem,
        samples=cfg.samples,
        seed=cfg.seed,
        constants=cfg.exchangeable_constants(),
        pair_kind=cfg.pair,
        pair_samples=cfg.pair_samples,
        bound_scale=bound_scale,
        digest=cfg.digest,
        workers=workers,
    )


# --------------------------------------------------------------------------
# Commands

def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bound_row(report: bounds_mod.BoundReport) -> list:
    echo = report.inputs_echo
    return [
        report.theorem, echo.get("n"), echo.get("k"), echo.get("lambda"),
        report.term_fourth, report.term_third, report.term_mixed, report.total,
        report.min_branch or "",
    ]


def _verify_row(rep: empirics.VerificationReport) -> list:
    return [
        rep.digest, rep.theorem, rep.n, rep.k, rep.samples,
        rep.discrepancy_estimate, rep.ci_halfwidth, rep.bound_total, rep.passed,
    ]


def cmd_bound(cfg: ExperimentConfig) -> int:
    ds = build_directions(cfg)
    model = build_model(cfg, ds.n)
    g = build_test_function(cfg, ds.k)
    rows = []
    for theorem in cfg.theorems():
        report = empirics.compute_bound(
            theorem, ds, model, g,
            constants=cfg.exchangeable_constants(),
            pair_kind=cfg.pair, pair_samples=cfg.pair_samples, seed=cfg.seed,
        )
        rows.append(_bound_row(report))
    _emit(_csv(BOUND_COLUMNS, rows), cfg.output)
    return 0


def cmd_verify(cfg: ExperimentConfig, bound_scale: float = 1.0,
               workers: Optional[int] = None) -> int:
    theorem = cfg.theorems()[0]
    task = build_task(cfg, theorem, bound_scale=bound_scale, workers=workers)
    rep = empirics.verify_bound(task)
    _emit(_csv(VERIFY_COLUMNS, [_verify_row(rep)]), cfg.output)
    return 0 if rep.passed else 1


def _scan_config(cfg: ExperimentConfig, axis: str, value: int) -> ExperimentConfig:
    dirs = dict(cfg.directions)
    dirs[axis] = value
    if dirs.get("kind") == "file":
        raise ConfigError("scan cannot vary file-based directions")
    raw = {
        "model": cfg.model,
        "directions": dirs,
        "test_function": cfg.test_function,
        "theorem": cfg.theorems()[0],
        "samples": cfg.samples,
        "seed": sources.derived_seed(cfg.seed, value) & 0x7FFFFFFFFFFFFFFF,
        "constants": cfg.constants,
        "pair_samples": cfg.pair_samples,
    }
    if cfg.pair is not None:
        raw["pair"] = cfg.pair
    return ExperimentConfig.from_dict(raw)


def cmd_scan(cfg: ExperimentConfig, axis: str, values: list[int],
             workers: Optional[int] = None) -> int:
    if axis not in ("n", "k"):
        raise ConfigError(f"scan axis must be 'n' or 'k', got {axis!r}")
    if not values:
        raise ConfigError("scan needs a non-empty list of axis values")
    if axis == "k" and not isinstance(cfg.test_function.get("a", "ones-normalized"), str):
        raise ConfigError("scanning k needs an adaptive cosine direction (a='ones-normalized')")
    rows = []
    all_pass = True
    for value in values:
        cell = _scan_config(cfg, axis, value)
        task = build_task(cell, cell.theorems()[0], workers=workers)
        rep = empirics.verify_bound(task)
        all_pass &= rep.passed
        br = rep.bound_report
        rows.append(
            _verify_row(rep)
            + [br.inputs_echo.get("lambda"), br.term_fourth, br.term_third,
               br.term_mixed, br.min_branch or ""]
        )
    _emit(_csv(SCAN_COLUMNS, rows), cfg.output)
    return 0 if all_pass else 1


def cmd_moments(cfg: ExperimentConfig) -> int:
    ds_spec = cfg.directions
    n = ds_spec.get("n")
    if n is None:
        n = build_directions(cfg).n
    model = build_model(cfg, n)
    m = sources.moment_summary(model)
    name = cfg.model.get("kind")
    row = [name, m.abs3, m.fourth, m.abs3_max, m.fourth_max, m.mixed_4, m.mixed_var]
    _emit(_csv(MOMENTS_COLUMNS, [row]), cfg.output)
    return 0


def cmd_check(cfg: ExperimentConfig) -> int:
    """Invariant diagnostics: shrinkage identities, closed-form/enumeration
    agreement for the pair errors, and moment cross-checks."""
    lines = []
    failed = False

    def record(name: str, ok: bool, detail: str) -> None:
        nonlocal failed
        failed |= not ok
        lines.append(f"check {name}: {'ok' if ok else 'FAIL'} ({detail})")

    ds = build_directions(cfg)
    model = build_model(cfg, ds.n)

    if isinstance(model, sources.ExchangeableModel):
        pair_kind = empirics.TRANSPOSITION
    else:
        pair_kind = empirics.RESAMPLING

    resid = empirics.conditional_linearity_check(ds, model, pair_kind, trials=200, seed=cfg.seed)
    record("linearity", resid <= 1e-10, f"max residual {resid:.3e}, pair={pair_kind}")

    # Closed-form/enumeration agreement at enumeration-friendly size.
    if pair_kind == empirics.RESAMPLING:
        small_n, small_k = 8, min(ds.k, 3)
        small_ds = random_orthonormal(small_n, small_k, seed=cfg.seed)
        small_model = model if isinstance(model, sources.IIDModel) else sources.rademacher()
    else:
        small_n, small_k = 6, min(ds.k, 3)
        small_ds = random_orthonormal(small_n, small_k, seed=cfg.seed, centered=True)
        small_model = sources.ExchangeableModel(
            population=sources.standardize_population(np.arange(1.0, small_n + 1.0))
        )
    worst = 0.0
    for t in range(50):
        x = sources.sample_vector(small_model, cfg.seed ^ t, n=small_n)
        closed = empirics.eij_closed_form(x, small_ds, pair_kind)
        enum = empirics.eij_enumerated(x, small_ds, small_model, pair_kind)
        worst = max(worst, float(np.max(np.abs(closed - enum))))
    record("eij-enumeration", worst <= 1e-12, f"max |closed - enumerated| {worst:.3e} at n={small_n}")

    if isinstance(model, sources.ExchangeableModel):
        small = sources.ExchangeableModel(
            population=model.population if model.n <= 8
            else sources.standardize_population(np.arange(1.0, 7.0))
        )
        fast = sources.exchangeable_moments(small)
        brute = _enumerated_mixed(small.population)
        err = max(abs(fast.mixed_4 - brute[0]), abs(fast.mixed_var - brute[1]))
        record("moments", err <= 1e-12, f"mixed-moment enumeration gap {err:.3e}")
    else:
        law = model if isinstance(model, sources.IIDModel) else model.coords[0]
        m = sources.iid_moments(law)
        draws = law.sampler(sources.stream(cfg.seed), 200_000)
        est3 = float(np.mean(np.abs(draws) ** 3))
        se3 = float(np.std(np.abs(draws) ** 3, ddof=1) / math.sqrt(draws.size))
        est4 = float(np.mean(draws**4))
        se4 = float(np.std(draws**4, ddof=1) / math.sqrt(draws.size))
        ok = abs(est3 - m.abs3) <= 5 * se3 + 1e-9 and abs(est4 - m.fourth) <= 5 * se4 + 1e-9
        record("moments", ok, f"abs3 {est3:.5f} vs {m.abs3:.5f}, fourth {est4:.5f} vs {m.fourth:.5f}")

    text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return 1 if failed else 0


def _enumerated_mixed(pop: np.ndarray) -> tuple[float, float]:
    """O(n^4) enumeration of the two mixed moments over ordered distinct tuples."""
    n = pop.size
    total4 = math.fsum(
        pop[i] * pop[j] * pop[k] * pop[l]
        for i, j, k, l in itertools.permutations(range(n), 4)
    )
    mixed_4 = total4 / (n * (n - 1) * (n - 2) * (n - 3))
    total_var = math.fsum(
        (pop[i] ** 2 - 1.0) * (pop[j] ** 2 - 1.0)
        for i, j in itertools.permutations(range(n), 2)
    )
    mixed_var = total_var / (n * (n - 1))
    return mixed_4, mixed_var


# --------------------------------------------------------------------------
# Entry point

def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        updates["samples"] = args.samples
    if getattr(args, "output", None) is not None:
        updates["output"] = args.output
    if getattr(args, "theorem", None) is not None:
        updates["theorem"] = args.theorem
    if not updates:
        return cfg
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projclt",
        description="Gaussian-approximation error bounds for projections, with Monte Carlo verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("bound", "evaluate the configured bound(s)"),
        ("verify", "compare the Monte Carlo discrepancy against the bound"),
        ("scan", "sweep n or k and verify each cell"),
        ("check", "run invariant diagnostics"),
        ("moments", "print the moment constants of the configured model"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--output", type=str, default=None)
        p.add_argument("--theorem", type=str, default=None)
        if name in ("verify", "scan"):
            p.add_argument("--workers", type=int, default=None)
        if name == "verify":
            p.add_argument(
                "--shrink-bound", type=float, default=1.0,
                help="multiply the bound by this factor before comparing (negative control)",
            )
        if name == "scan":
            p.add_argument("--axis", choices=("n", "k"), required=True)
            p.add_argument("--values", type=str, required=True,
                           help="comma-separated axis values")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(ExperimentConfig.from_file(args.config), args)
        if args.command == "bound":
            return cmd_bound(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, bound_scale=args.shrink_bound, workers=args.workers)
        if args.command == "scan":
            try:
                values = [int(tok) for tok in args.values.split(",") if tok.strip()]
            except ValueError as exc:
                raise ConfigError(f"scan values must be integers: {args.values!r}") from exc
            return cmd_scan(cfg, args.axis, values, workers=args.workers)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "moments":
            return cmd_moments(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ProjcltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())
