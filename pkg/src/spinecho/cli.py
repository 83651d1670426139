"""Batch front end: INI run configs, presets, CSV artifacts, run manifest.

Exit codes: 0 success, 2 configuration error, 3 capacity error, 4 numerical
non-convergence.  A manifest written next to the outputs embeds the fully
expanded configuration, so re-running ``spinecho --config manifest.ini``
reproduces the artifacts bit for bit.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import eta_f, write_scaling_tables
from .basis import MAX_SITES
from .echo import (
    M11_EXACT_MAX_SITES,
    MMB_EXACT_MAX_SITES,
    EchoProtocol,
    m11_exact_trace,
    m11_random_phase,
    m_x,
    mmb,
)
from .errors import CapacityError, ConfigError, ConvergenceError
from .expansions import fit_power_coefficient, m11_order4_commuting, verify_trace_identities
from .hamiltonians import ModelSpec, second_moments
from .propagator import METHODS, PropagationConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NONCONVERGENCE = 4

TASK_KINDS = ("echo", "identities", "appendix")
M11_MODES = ("auto", "exact_trace", "random_phase")
MMB_MODES = ("auto", "exact", "sampled")


@dataclass
class RunConfig:
    """One fully explicit run: every preset expands into this."""

    kind: str = "echo"
    # model
    n_list: tuple = (14,)
    j0: float = 1.0
    j_sigma_list: tuple = (0.1,)
    alpha: float = 0.0
    sigma_family: str = "nnn_xxz"
    sigma_boundary: str = "periodic"
    disorder_seed: int = 0
    # grid
    t_max: float = 40.0
    n_points: int = 81
    t_fine_max: float = 0.0
    fine_points: int = 0
    # estimators
    m11_mode: str = "auto"
    mmb_mode: str = "auto"
    seeds: int = 0          # 0: size-based default (20 for n <= 10, else 1)
    samples: int = 1024
    seed: int = 0
    # propagation
    tol: float = 1e-9
    max_krylov_dim: int = 30
    dt_max: float = 0.5
    method: str = "auto"
    # outputs
    directory: str = "out"
    label: str = "run"
    threads: int = 1
    # identities / appendix extras
    alpha_list: tuple = (0.0, 0.5, 1.0)
    meta: dict = field(default_factory=dict)

    def sections(self):
        """The expanded config as INI sections (strings only)."""
        fmt = lambda xs: ",".join(repr(x) if isinstance(x, str) else str(x) for x in xs)
        return {
            "task": {"kind": self.kind},
            "model": {
                "n_list": ",".join(str(x) for x in self.n_list),
                "j0": str(self.j0),
                "j_sigma_list": ",".join(str(x) for x in self.j_sigma_list),
                "alpha": str(self.alpha),
                "sigma_family": self.sigma_family,
                "sigma_boundary": self.sigma_boundary,
                "disorder_seed": str(self.disorder_seed),
            },
            "grid": {
                "t_max": str(self.t_max),
                "n_points": str(self.n_points),
                "t_fine_max": str(self.t_fine_max),
                "fine_points": str(self.fine_points),
            },
            "estimators": {
                "m11_mode": self.m11_mode,
                "mmb_mode": self.mmb_mode,
                "seeds": str(self.seeds),
                "samples": str(self.samples),
                "seed": str(self.seed),
            },
            "propagation": {
                "tol": str(self.tol),
                "max_krylov_dim": str(self.max_krylov_dim),
                "dt_max": str(self.dt_max),
                "method": self.method,
            },
            "outputs": {
                "directory": self.directory,
                "label": self.label,
                "threads": str(self.threads),
            },
            "identities": {
                "alpha_list": ",".join(str(x) for x in self.alpha_list),
            },
        }

    def canonical_text(self) -> str:
        buf = io.StringIO()
        for sec, items in self.sections().items():
            buf.write(f"[{sec}]\n")
            for key, val in items.items():
                buf.write(f"{key} = {val}\n")
            buf.write("\n")
        return buf.getvalue()


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    try:
        get = parser.get
        if parser.has_option("task", "kind"):
            cfg.kind = get("task", "kind")
        sec = "model"
        if parser.has_section(sec):
            if parser.has_option(sec, "n_list"):
                cfg.n_list = _ints(get(sec, "n_list"))
            elif parser.has_option(sec, "n"):
                cfg.n_list = (parser.getint(sec, "n"),)
            if parser.has_option(sec, "j0"):
                cfg.j0 = parser.getfloat(sec, "j0")
            if parser.has_option(sec, "j_sigma_list"):
                cfg.j_sigma_list = _floats(get(sec, "j_sigma_list"))
            elif parser.has_option(sec, "j_sigma"):
                cfg.j_sigma_list = (parser.getfloat(sec, "j_sigma"),)
            for key in ("alpha",):
                if parser.has_option(sec, key):
                    cfg.alpha = parser.getfloat(sec, key)
            if parser.has_option(sec, "sigma_family"):
                cfg.sigma_family = get(sec, "sigma_family")
            if parser.has_option(sec, "sigma_boundary"):
                cfg.sigma_boundary = get(sec, "sigma_boundary")
            if parser.has_option(sec, "disorder_seed"):
                cfg.disorder_seed = parser.getint(sec, "disorder_seed")
        sec = "grid"
        if parser.has_section(sec):
            for key in ("t_max", "t_fine_max"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, parser.getfloat(sec, key))
            for key in ("n_points", "fine_points"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, parser.getint(sec, key))
        sec = "estimators"
        if parser.has_section(sec):
            for key in ("m11_mode", "mmb_mode"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, get(sec, key))
            for key in ("seeds", "samples", "seed"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, parser.getint(sec, key))
        sec = "propagation"
        if parser.has_section(sec):
            for key in ("tol", "dt_max"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, parser.getfloat(sec, key))
            if parser.has_option(sec, "max_krylov_dim"):
                cfg.max_krylov_dim = parser.getint(sec, "max_krylov_dim")
            if parser.has_option(sec, "method"):
                cfg.method = get(sec, "method")
        sec = "outputs"
        if parser.has_section(sec):
            for key in ("directory", "label"):
                if parser.has_option(sec, key):
                    setattr(cfg, key, get(sec, key))
            if parser.has_option(sec, "threads"):
                cfg.threads = parser.getint(sec, "threads")
        if parser.has_option("identities", "alpha_list"):
            cfg.alpha_list = _floats(parser.get("identities", "alpha_list"))
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    return cfg


PRESETS = {}


def _preset_fig3():
    return RunConfig(
        kind="echo",
        n_list=(14,),
        j_sigma_list=(0.1,),
        t_max=40.0,
        n_points=81,
        t_fine_max=3.0,
        fine_points=31,
        m11_mode="random_phase",
        mmb_mode="sampled",
        seeds=1,
        samples=1024,
        label="fig3",
    )


def _preset_fig4():
    return RunConfig(
        kind="echo",
        n_list=(10, 12, 14, 16),
        j_sigma_list=(0.1, 0.2, 0.3),
        t_max=40.0,
        n_points=81,
        t_fine_max=3.0,
        fine_points=31,
        label="fig4",
    )


def _preset_identities():
    return RunConfig(
        kind="identities",
        n_list=(8,),
        j_sigma_list=(0.1,),
        sigma_family="generic_secular",
        alpha_list=(0.0, 0.5, 1.0),
        label="identities",
    )


def _preset_appendix():
    return RunConfig(
        kind="appendix",
        n_list=(8,),
        j_sigma_list=(0.1,),
        sigma_family="ising_nnn",
        sigma_boundary="open",
        t_max=0.25,
        n_points=26,
        m11_mode="exact_trace",
        label="appendix",
    )


PRESETS.update(
    fig3=_preset_fig3, fig4=_preset_fig4, identities=_preset_identities,
    appendix=_preset_appendix,
)


def validate(cfg: RunConfig):
    """All diagnostics for a config; each is (category, message)."""
    problems = []
    bad = lambda msg: problems.append(("config", msg))
    capacity = lambda msg: problems.append(("capacity", msg))
    if cfg.kind not in TASK_KINDS:
        bad(f"task.kind: unknown kind {cfg.kind!r}")
    if not cfg.n_list:
        bad("model.n_list: empty")
    for n in cfg.n_list:
        if not 2 <= n <= MAX_SITES:
            capacity(f"model.n_list: n={n} outside [2, {MAX_SITES}]")
    if cfg.j0 <= 0:
        bad("model.j0: must be positive")
    for js in cfg.j_sigma_list:
        if js < 0:
            bad(f"model.j_sigma_list: j_sigma={js} negative")
    if cfg.sigma_family not in ("nnn_xxz", "generic_secular", "ising_nnn", "onsite_disorder"):
        bad(f"model.sigma_family: unknown family {cfg.sigma_family!r}")
    if cfg.sigma_boundary not in ("open", "periodic"):
        bad(f"model.sigma_boundary: unknown boundary {cfg.sigma_boundary!r}")
    if cfg.n_points < 1 or (cfg.n_points == 1 and cfg.fine_points == 0):
        bad("grid.n_points: grid must contain at least t=0 and one positive time")
    if cfg.t_max <= 0:
        bad("grid.t_max: must be positive")
    if cfg.m11_mode not in M11_MODES:
        bad(f"estimators.m11_mode: unknown mode {cfg.m11_mode!r}")
    if cfg.mmb_mode not in MMB_MODES:
        bad(f"estimators.mmb_mode: unknown mode {cfg.mmb_mode!r}")
    for n in cfg.n_list:
        if cfg.m11_mode == "exact_trace" and n > M11_EXACT_MAX_SITES:
            capacity(
                f"estimators.m11_mode: exact_trace needs n <= {M11_EXACT_MAX_SITES}, "
                f"got n={n}; suggestion: random_phase"
            )
        if cfg.mmb_mode == "exact" and n > MMB_EXACT_MAX_SITES:
            capacity(
                f"estimators.mmb_mode: exact needs n <= {MMB_EXACT_MAX_SITES}, "
                f"got n={n}; suggestion: sampled"
            )
        if cfg.mmb_mode == "sampled" and cfg.samples > 1 << (n - 1):
            bad(
                f"estimators.samples: {cfg.samples} exceeds |A| = {1 << (n - 1)} at n={n}"
            )
    if not 0.0 < cfg.tol < 1e-4:
        bad("propagation.tol: must lie in (0, 1e-4)")
    if cfg.method not in METHODS:
        bad(f"propagation.method: unknown method {cfg.method!r}")
    if cfg.threads < 1:
        bad("outputs.threads: must be >= 1")
    if cfg.kind == "identities" and cfg.sigma_family != "generic_secular":
        bad("identities task requires sigma_family = generic_secular")
    if cfg.kind == "appendix" and cfg.sigma_family not in ("ising_nnn", "onsite_disorder"):
        bad("appendix task requires a perturbation commuting with S_1^z")
    return problems


def build_grid(cfg: RunConfig) -> np.ndarray:
    coarse = np.linspace(0.0, cfg.t_max, cfg.n_points)
    if cfg.fine_points > 0 and cfg.t_fine_max > 0:
        fine = np.linspace(0.0, cfg.t_fine_max, cfg.fine_points)
        return np.unique(np.concatenate([fine, coarse]))
    return coarse


def model_spec(cfg: RunConfig, n: int, j_sigma: float, alpha=None) -> ModelSpec:
    return ModelSpec(
        n=n,
        j0=cfg.j0,
        j_sigma=j_sigma,
        alpha=cfg.alpha if alpha is None else alpha,
        sigma_family=cfg.sigma_family,
        sigma_boundary=cfg.sigma_boundary,
        disorder_seed=cfg.disorder_seed,
    )


def _default_seeds(n: int, requested: int):
    if requested > 0:
        return list(range(requested))
    return list(range(20 if n <= 10 else 1))


def run_echo_single(cfg: RunConfig, n: int, j_sigma: float):
    """One (n, j_sigma) echo computation; returns the combined series."""
    spec = model_spec(cfg, n, j_sigma)
    pcfg = PropagationConfig(
        tol=cfg.tol, max_krylov_dim=cfg.max_krylov_dim, dt_max=cfg.dt_max,
        method=cfg.method,
    )
    protocol = EchoProtocol(spec=spec, cfg=pcfg, t_grid=build_grid(cfg))
    m11_mode = cfg.m11_mode
    if m11_mode == "auto":
        m11_mode = "exact_trace" if n <= M11_EXACT_MAX_SITES else "random_phase"
    mmb_mode = cfg.mmb_mode
    if mmb_mode == "auto":
        mmb_mode = "exact" if n <= MMB_EXACT_MAX_SITES else "sampled"
    if m11_mode == "exact_trace":
        s11 = m11_exact_trace(protocol)
    else:
        seeds = [cfg.seed + i for i in _default_seeds(n, cfg.seeds)]
        s11 = m11_random_phase(protocol, seeds, threads=cfg.threads)
    if mmb_mode == "exact":
        smb = mmb(protocol, mode="exact")
    else:
        smb = mmb(
            protocol, mode="sampled", k=cfg.samples, seed=cfg.seed,
            threads=cfg.threads,
        )
    return m_x(s11, smb)


def _echo_tag(n, j_sigma):
    return f"n{n:02d}_js{j_sigma:g}"


def run(cfg: RunConfig, out_dir: Path):
    """Execute a validated config; returns (artifact paths, manifest extras)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    derived = {}
    if cfg.kind == "echo":
        tables = []
        for n in cfg.n_list:
            for js in cfg.j_sigma_list:
                tag = _echo_tag(n, js)
                series = run_echo_single(cfg, n, js)
                path = out_dir / f"{cfg.label}_{tag}_echo.csv"
                series.to_csv(path)
                paths.append(path)
                mom = second_moments(model_spec(cfg, n, js))
                derived[tag] = {
                    "n": n,
                    "j_sigma": js,
                    "sigma2": mom.sigma2,
                    "sigma0_2": mom.sigma0_2,
                    "tau_sigma": mom.tau_sigma,
                    "csv": path.name,
                }
                if series.m11 is not None and series.m_mb is not None and js > 0:
                    tables.append(eta_f(series, n, js))
        if tables:
            spath = out_dir / f"{cfg.label}_scaling.csv"
            write_scaling_tables(spath, tables)
            paths.append(spath)
    elif cfg.kind == "identities":
        path = out_dir / f"{cfg.label}_residuals.csv"
        with open(path, "w") as fh:
            fh.write("alpha,identity,computed,expected,residual\n")
            names = ("sigma_sq", "sigma_s1z_sigma", "sigma_diag_sq")
            for alpha in cfg.alpha_list:
                spec = model_spec(cfg, cfg.n_list[0], cfg.j_sigma_list[0], alpha=alpha)
                rep = verify_trace_identities(spec)
                for name, c, e, r in zip(names, rep.computed, rep.expected, rep.residuals):
                    fh.write("%g,%s,%.12e,%.12e,%.12e\n" % (alpha, name, c, e, r))
        paths.append(path)
    elif cfg.kind == "appendix":
        n = cfg.n_list[0]
        js = cfg.j_sigma_list[0]
        spec = model_spec(cfg, n, js)
        c4 = m11_order4_commuting(spec)
        pcfg = PropagationConfig(tol=cfg.tol, max_krylov_dim=cfg.max_krylov_dim,
                                 dt_max=cfg.dt_max, method=cfg.method)
        protocol = EchoProtocol(spec=spec, cfg=pcfg, t_grid=build_grid(cfg))
        series = m11_exact_trace(protocol)
        mom = second_moments(spec)
        window = 0.05 / math.sqrt(math.sqrt(mom.sigma2 * mom.sigma0_2))
        c4_fit = fit_power_coefficient(series.t, 1.0 - series.m11, 4, window)
        path = out_dir / f"{cfg.label}_order4.csv"
        with open(path, "w") as fh:
            fh.write("quantity,value\n")
            fh.write("c4_formula,%.12e\n" % c4)
            fh.write("c4_fit,%.12e\n" % c4_fit)
            fh.write("fit_window,%.12e\n" % window)
        paths.append(path)
    return paths, derived


def write_manifest(cfg: RunConfig, out_dir: Path, derived, wall_time: float) -> Path:
    text = cfg.canonical_text()
    digest = hashlib.sha256(text.encode()).hexdigest()
    path = out_dir / f"{cfg.label}_manifest.ini"
    with open(path, "w") as fh:
        fh.write("# spinecho run manifest; re-run with: spinecho --config <this file>\n")
        fh.write(text)
        fh.write("[manifest]\n")
        fh.write(f"config_sha256 = {digest}\n")
        fh.write(f"spinecho_version = {__version__}\n")
        fh.write(f"wall_time_s = {wall_time:.3f}\n\n")
        for tag, info in derived.items():
            fh.write(f"[run_{tag}]\n")
            for key, val in info.items():
                fh.write(f"{key} = {val}\n")
            fh.write("\n")
    return path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinecho",
        description="Loschmidt-echo dynamics of spin-1/2 chains",
    )
    parser.add_argument("--config", type=Path, help="INI run configuration")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named preset")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="base RNG seed")
    parser.add_argument("--threads", type=int, default=None, help="worker cap")
    parser.add_argument("--validate-only", action="store_true",
                        help="report diagnostics without running")
    args = parser.parse_args(argv)

    if args.config is None and args.preset is None:
        print("error: need --config or --preset", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = PRESETS[args.preset]() if args.preset else load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.config is not None and args.preset is not None:
        print("error: --config and --preset are mutually exclusive", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.directory = str(args.out)

    problems = validate(cfg)
    for category, msg in problems:
        print(f"{category}: {msg}", file=sys.stderr)
    if args.validate_only:
        return EXIT_OK if not problems else (
            EXIT_CAPACITY if any(c == "capacity" for c, _ in problems) else EXIT_CONFIG
        )
    if problems:
        return EXIT_CAPACITY if any(c == "capacity" for c, _ in problems) else EXIT_CONFIG

    out_dir = Path(cfg.directory)
    start = time.time()
    try:
        paths, derived = run(cfg, out_dir)
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ConfigError, ValueError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = write_manifest(cfg, out_dir, derived, time.time() - start)
    for p in paths + [manifest]:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
