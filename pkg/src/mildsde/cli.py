"""Batch experiment driver: config parsing, campaign execution, CSV and
summary emission.

Subcommands
-----------
* ``picard``           iteration-distance table against the factorial bound,
                       plus the iterate moment-bound check
* ``ito-check``        pathwise energy-inequality violation rates at dt and
                       dt/2 on shared realizations
* ``benchmark``        linear-model strong error against the stochastic
                       exponential closed form across dt = 2^-6 .. 2^-12
* ``hypothesis-check`` coefficient-contract checkers on the configured model
* ``simulate``         direct-solver path dump

Runs are reproducible: paths draw their noise from (seed, path index), chunk
boundaries are fixed by ``chunk_size`` independently of ``threads``, and
chunk results are reduced in index order, so outputs are byte-identical for a
fixed (config, seed) regardless of the thread count.

Exit codes: 0 all diagnostics pass; 2 diagnostic failure; 3 configuration
error; 4 solver divergence or nonconvergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import check_lipschitz_growth, check_semimonotone
from .convolution import ito_inequality_check
from .models import (
    EXAMPLE_BUILDERS,
    build_delay,
    build_hyperbolic,
    build_linear_scalar,
    build_reaction_diffusion,
    default_levy,
    gaussian_marks,
    stochastic_exponential,
)
from .noise import TimeGrid
from .solver import (
    InnerIterationError,
    ModelSpec,
    PicardDivergenceError,
    PicardTrace,
    SolverError,
    coarsen_noise,
    direct_solve_batch,
    draw_noise,
    picard_solve_batch,
)
from .state_space import weighted_norm_sq

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunSummary",
    "model_from_config",
    "run_picard_campaign",
    "run_ito_check",
    "run_benchmark_oracle",
    "run_hypothesis_check",
    "run_simulate",
    "main",
    "entrypoint",
]

EXIT_OK = 0
EXIT_DIAGNOSTIC = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Complete, self-describing description of one campaign run.

    ``model_params`` carries example-specific knobs (jump_rate, mark_std,
    mark_mean, eta, levy_drift, levy_gaussian_variance, x0_amplitude, n_quad,
    a, sigma, x0). All other fields are common. The config round-trips
    losslessly through JSON.
    """

    example: str = "reaction_diffusion"
    dim: int = 16
    dt: float = 1e-3
    horizon: float = 1.0
    paths: int = 200
    seed: int = 0
    n_max: int = 10
    threads: int = 1
    chunk_size: int = 64
    out_dir: str = "out"
    inner_tol: float = 1e-8
    damping: float = 1.0
    ito_tol_coeff: float | None = None
    bdg_constant: float = 3.0
    refine_check: bool = True
    dump_paths: int = 4
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be > 0")
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be > 0")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.example not in EXAMPLE_BUILDERS:
            raise ConfigError(
                f"unknown example {self.example!r}; choices {sorted(EXAMPLE_BUILDERS)}"
            )
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def grid(self) -> TimeGrid:
        n = round(self.horizon / self.dt)
        if n < 1 or abs(n * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ConfigError(
                f"dt {self.dt} does not evenly divide horizon {self.horizon}"
            )
        return TimeGrid(self.horizon, n)


def model_from_config(config: RunConfig, validate: bool = True) -> ModelSpec:
    p = dict(config.model_params)
    common = dict(horizon=config.horizon, validate=validate)
    if config.ito_tol_coeff is not None:
        common["ito_tol_coeff"] = config.ito_tol_coeff
    name = config.example
    if name == "reaction_diffusion":
        marks = gaussian_marks(
            rate=p.pop("jump_rate", 1.0),
            std=p.pop("mark_std", 0.3),
            mean=p.pop("mark_mean", 0.0),
        )
        return build_reaction_diffusion(
            dim=config.dim,
            marks=marks,
            eta=p.pop("eta", 0.0),
            n_quad=p.pop("n_quad", None),
            x0_amplitude=p.pop("x0_amplitude", 1.0),
            **common,
            **_reject_leftover(name, p),
        )
    if name == "hyperbolic":
        levy = default_levy(
            rate=p.pop("jump_rate", 1.0),
            mark_std=p.pop("mark_std", 0.3),
            mark_mean=p.pop("mark_mean", 0.0),
            drift=p.pop("levy_drift", 0.0),
            gaussian_variance=p.pop("levy_gaussian_variance", 0.0),
        )
        return build_hyperbolic(
            n_modes=config.dim,
            levy=levy,
            n_quad=p.pop("n_quad", None),
            x0_amplitude=p.pop("x0_amplitude", 1.0),
            **common,
            **_reject_leftover(name, p),
        )
    if name == "delay":
        levy = default_levy(
            rate=p.pop("jump_rate", 1.0),
            mark_std=p.pop("mark_std", 0.3),
            mark_mean=p.pop("mark_mean", 0.0),
            drift=p.pop("levy_drift", 0.0),
            gaussian_variance=p.pop("levy_gaussian_variance", 0.0),
        )
        return build_delay(
            history_cells=config.dim, levy=levy, **common, **_reject_leftover(name, p)
        )
    if name == "linear_scalar":
        marks = gaussian_marks(
            rate=p.pop("jump_rate", 2.0),
            std=p.pop("mark_std", 0.2),
            mean=p.pop("mark_mean", 0.0),
        )
        return build_linear_scalar(
            a=p.pop("a", -1.0),
            sigma=p.pop("sigma", 0.5),
            marks=marks,
            x0=p.pop("x0", 1.0),
            **common,
            **_reject_leftover(name, p),
        )
    raise ConfigError(f"unknown example {name!r}")


def _reject_leftover(name: str, params: dict) -> dict:
    if params:
        raise ConfigError(f"unknown model_params for {name}: {sorted(params)}")
    return {}


@dataclass
class RunSummary:
    """Machine-readable campaign outcome; serialized as key = value lines."""

    command: str
    config: RunConfig
    passed: bool
    checks: dict
    stats: dict
    wall_clock_s: float

    def to_text(self) -> str:
        lines = [
            "schema = mildsde-summary-v1",
            f"command = {self.command}",
            f"passed = {self.passed}",
        ]
        for key in sorted(self.checks):
            lines.append(f"check.{key} = {self.checks[key]}")
        for key in sorted(self.stats):
            lines.append(f"stat.{key} = {_fmt(self.stats[key])}")
        cfg = self.config.to_dict()
        for key in sorted(cfg):
            lines.append(f"config.{key} = {_fmt(cfg[key])}")
        lines.append(f"wall_clock_s = {self.wall_clock_s:.3f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Path, name: str = "summary.txt"):
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(self.to_text())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return str(v)


def _write_csv(path: Path, schema: str, header: list[str], rows):
    """Byte-deterministic CSV: schema comment line, then header and rows with
    full-precision float formatting."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
            )


def _chunk_ranges(paths: int, chunk_size: int) -> list[range]:
    return [range(s, min(s + chunk_size, paths)) for s in range(0, paths, chunk_size)]


def _run_chunks(fn, paths: int, chunk_size: int, threads: int) -> list:
    """Apply fn to fixed path-index chunks; results come back in chunk order
    regardless of scheduling, so reductions are thread-count independent."""
    ranges = _chunk_ranges(paths, chunk_size)
    if threads <= 1 or len(ranges) == 1:
        return [fn(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, ranges))


def _mean_se(samples: np.ndarray, axis=-1) -> tuple[np.ndarray, np.ndarray]:
    mean = samples.mean(axis=axis)
    n = samples.shape[axis]
    if n > 1:
        se = samples.std(axis=axis, ddof=1) / math.sqrt(n)
    else:
        se = np.zeros_like(mean)
    return mean, se


# ---------------------------------------------------------------------------
# picard campaign


def run_picard_campaign(config: RunConfig) -> RunSummary:
    t_start = time.perf_counter()
    model = model_from_config(config)
    grid = config.grid()
    out = Path(config.out_dir)

    def chunk(path_range):
        noise = draw_noise(model, grid, config.seed, path_range)
        res = picard_solve_batch(
            model, grid, noise=noise, n_max=config.n_max, run_all=True,
            damping=config.damping, inner_tol=config.inner_tol,
        )
        x0_sq = weighted_norm_sq(noise.x0, model.weights)
        norms = np.sqrt(weighted_norm_sq(res.values, model.weights))
        return res.distances, res.x_sup_sq, res.v_sup_sq, x0_sq, norms

    results = _run_chunks(chunk, config.paths, config.chunk_size, config.threads)
    distances = np.concatenate([r[0] for r in results], axis=1)
    x_sup = np.concatenate([r[1] for r in results], axis=1)
    v_sup = np.concatenate([r[2] for r in results], axis=1)
    x0_sq = np.concatenate([r[3] for r in results])
    norms = np.concatenate([r[4] for r in results], axis=0)

    n_iters = distances.shape[0]
    e_mean, e_se = _mean_se(distances)
    horizon = config.horizon
    m_const = model.coeffs.semimonotone_m
    c_const = model.coeffs.lipschitz_c
    d_const = model.coeffs.growth_d
    c1 = 2.0 * c_const * (1.0 + 2.0 * config.bdg_constant**2) * math.exp(4.0 * m_const * horizon)
    c0 = float(e_mean[0])
    bounds = PicardTrace.predicted_bound(c0, c1, horizon, np.arange(n_iters))

    # Rate diagnostics: consecutive decay against 2 C1 T / (n + 1), and
    # monotone decrease from the second distance on (ties allowed once the
    # distances sit at the floating point floor).
    ratio_ok = True
    mono_ok = True
    for n in range(2, min(8, n_iters - 2) + 1):
        allowed = 2.0 * c1 * horizon / (n + 1.0)
        if e_mean[n + 1] > allowed * e_mean[n]:
            ratio_ok = False
    for n in range(2, n_iters - 1):
        if e_mean[n + 1] > e_mean[n] and e_mean[n + 1] > 1e-30:
            mono_ok = False

    # Iterate moment bound: E sup ||X^n||^2 against the explicit constant
    # chain, Monte Carlo both sides, two standard errors of slack.
    factor = 3.0 * d_const * horizon**2 * math.exp(2.0 * m_const * horizon)
    coef = 3.0 + 2.0 * factor
    x0_mean, x0_se = _mean_se(x0_sq)
    xs_mean, xs_se = _mean_se(x_sup)
    vs_mean, vs_se = _mean_se(v_sup)
    moment_rows = []
    moment_ok = True
    for n in range(1, min(8, n_iters) + 1):
        lhs = xs_mean[n]
        rhs = factor + coef * (x0_mean + vs_mean[n - 1])
        se_total = math.sqrt(xs_se[n] ** 2 + (coef * x0_se) ** 2 + (coef * vs_se[n - 1]) ** 2)
        ok = lhs <= rhs + 2.0 * se_total
        moment_ok &= ok
        moment_rows.append(
            (n, float(lhs), float(xs_se[n]), float(vs_mean[n - 1]), float(vs_se[n - 1]),
             float(rhs), float(rhs + 2.0 * se_total - lhs), ok)
        )

    rows = []
    for n in range(n_iters):
        ratio = float(e_mean[n] / e_mean[n - 1]) if n >= 1 and e_mean[n - 1] > 0 else float("nan")
        allowed = 2.0 * c1 * horizon / (n + 1.0)
        rows.append((n, float(e_mean[n]), float(e_se[n]), float(bounds[n]), ratio, allowed))
    _write_csv(
        out / "picard_iterations.csv", "mildsde-picard-v1",
        ["n", "e_n", "stderr", "predicted_bound", "ratio", "ratio_allowed"], rows,
    )
    _write_csv(
        out / "picard_moments.csv", "mildsde-picard-moments-v1",
        ["n", "x_sup_sq_mean", "x_sup_sq_se", "v_sup_sq_mean", "v_sup_sq_se",
         "bound_rhs", "margin", "passed"], moment_rows,
    )
    k = min(config.dump_paths, config.paths)
    path_rows = [
        (float(grid.times[j]), *[float(norms[p, j]) for p in range(k)])
        for j in range(grid.n_steps + 1)
    ]
    _write_csv(
        out / "picard_paths.csv", "mildsde-paths-v1",
        ["t"] + [f"path{p}_norm" for p in range(k)], path_rows,
    )

    passed = ratio_ok and mono_ok and moment_ok
    summary = RunSummary(
        command="picard",
        config=config,
        passed=passed,
        checks={"rate_ratio": ratio_ok, "monotone_decay": mono_ok, "moment_bound": moment_ok},
        stats={
            "c0": c0, "c1": c1, "e_final": float(e_mean[-1]),
            "iterations": n_iters, "paths": config.paths,
        },
        wall_clock_s=time.perf_counter() - t_start,
    )
    summary.write(out)
    return summary


# ---------------------------------------------------------------------------
# energy-inequality campaign


def run_ito_check(config: RunConfig) -> RunSummary:
    t_start = time.perf_counter()
    model = model_from_config(config)
    grid = config.grid()
    fine = grid.refine(2)
    tol_coeff = config.ito_tol_coeff if config.ito_tol_coeff is not None else model.ito_tol_coeff
    out = Path(config.out_dir)

    def chunk(path_range):
        noise_fine = draw_noise(model, grid=fine, master_seed=config.seed, path_indices=path_range)
        noise = coarsen_noise(noise_fine, 2)
        out_c = direct_solve_batch(model, grid, noise=noise, record_increments=True)
        rep = ito_inequality_check(
            model.semigroup, model.semigroup.alpha, noise.x0, out_c.increments,
            tol_coeff=tol_coeff, weights=model.weights,
        )
        if config.refine_check:
            out_f = direct_solve_batch(model, fine, noise=noise_fine, record_increments=True)
            rep_f = ito_inequality_check(
                model.semigroup, model.semigroup.alpha, noise_fine.x0, out_f.increments,
                tol_coeff=tol_coeff, weights=model.weights,
            )
            fine_mask = rep_f.violation_mask()
        else:
            fine_mask = np.zeros(len(path_range), dtype=bool)
        return rep.slack, rep.violation_mask(), fine_mask

    results = _run_chunks(chunk, config.paths, config.chunk_size, config.threads)
    slack = np.concatenate([r[0] for r in results], axis=0)
    coarse_mask = np.concatenate([r[1] for r in results])
    fine_mask = np.concatenate([r[2] for r in results])

    rate = float(coarse_mask.mean())
    rate_fine = float(fine_mask.mean())
    se_bin = math.sqrt(max(rate * (1 - rate), 1.0 / config.paths) / config.paths)
    rate_ok = rate <= 0.01
    refine_ok = (not config.refine_check) or (rate_fine <= rate + 2.0 * se_bin)

    qs = np.quantile(slack, [0.0, 0.01, 0.05, 0.5], axis=0)
    rows = [
        (float(grid.times[j]), float(qs[0, j]), float(qs[1, j]), float(qs[2, j]), float(qs[3, j]))
        for j in range(grid.n_steps + 1)
    ]
    _write_csv(
        out / "ito_slack.csv", "mildsde-ito-v1",
        ["t", "slack_min", "slack_q01", "slack_q05", "slack_median"], rows,
    )
    passed = rate_ok and refine_ok
    summary = RunSummary(
        command="ito-check",
        config=config,
        passed=passed,
        checks={"violation_rate": rate_ok, "refinement_non_increasing": refine_ok},
        stats={
            "violation_rate": rate, "violation_rate_half_dt": rate_fine,
            "tolerance": tol_coeff * math.sqrt(grid.dt), "min_slack": float(slack.min()),
        },
        wall_clock_s=time.perf_counter() - t_start,
    )
    summary.write(out)
    return summary


# ---------------------------------------------------------------------------
# closed-form benchmark


def run_benchmark_oracle(config: RunConfig) -> RunSummary:
    t_start = time.perf_counter()
    p = dict(config.model_params)
    exponents = p.pop("dt_exponents", list(range(6, 13)))
    config = dataclasses.replace(config, example="linear_scalar", model_params=p)
    model = model_from_config(config)
    a = p.get("a", -1.0)
    sigma = p.get("sigma", 0.5)
    nu_mean = model.marks.rate * model.marks.mean_mark() if model.marks else 0.0
    x0 = p.get("x0", 1.0)
    out = Path(config.out_dir)

    rms = []
    for lvl_index, lvl in enumerate(exponents):
        grid = TimeGrid(config.horizon, 2**lvl)

        def chunk(path_range, grid=grid, lvl_index=lvl_index):
            offset = lvl_index * config.paths
            noise = draw_noise(
                model, grid, config.seed, [offset + i for i in path_range]
            )
            res = direct_solve_batch(model, grid, noise=noise)
            errs = np.zeros(len(path_range))
            for row in range(len(path_range)):
                w_path = np.concatenate([[0.0], np.cumsum(noise.dW[row, :, 0])]) if noise.dW.shape[2] else np.zeros(grid.n_steps + 1)
                exact = stochastic_exponential(
                    x0, a, sigma, nu_mean, grid.times, w_path, noise.events_by_path[row]
                )
                errs[row] = (res.values[row, -1, 0] - exact[-1]) ** 2
            return errs

        errs = np.concatenate(
            _run_chunks(chunk, config.paths, config.chunk_size, config.threads)
        )
        rms.append(math.sqrt(float(errs.mean())))

    log_dt = -np.asarray(exponents, dtype=float)
    order = float(np.polyfit(log_dt, np.log2(rms), 1)[0])
    rms_at = {lvl: r for lvl, r in zip(exponents, rms)}
    abs_ok = rms_at.get(10, rms[-1]) < 1e-2
    order_ok = order >= 0.45

    rows = [(lvl, 2.0 ** (-lvl), float(r), config.paths) for lvl, r in zip(exponents, rms)]
    _write_csv(
        out / "benchmark.csv", "mildsde-benchmark-v1",
        ["dt_exponent", "dt", "rms_error", "paths"], rows,
    )
    passed = abs_ok and order_ok
    summary = RunSummary(
        command="benchmark",
        config=config,
        passed=passed,
        checks={"strong_order": order_ok, "absolute_error": abs_ok},
        stats={"fitted_order": order, "rms_dt_2e-10": float(rms_at.get(10, rms[-1]))},
        wall_clock_s=time.perf_counter() - t_start,
    )
    summary.write(out)
    return summary


# ---------------------------------------------------------------------------
# hypothesis checkers


def run_hypothesis_check(config: RunConfig) -> RunSummary:
    t_start = time.perf_counter()
    model = model_from_config(config, validate=False)
    out = Path(config.out_dir)
    mono = check_semimonotone(
        model.coeffs.drift, model.dim, model.weights,
        samples=10_000, t_max=config.horizon, seed=config.seed,
    )
    growth = check_lipschitz_growth(
        model.coeffs, model.dim, model.weights, model.marks,
        samples=10_000, t_max=config.horizon, seed=config.seed,
    )
    rows = [
        ("semimonotone", float(mono.max_ratio), float(mono.declared_m), mono.passed),
        ("diffusion_lipschitz", float(growth.diffusion_lipschitz_max),
         float(model.coeffs.diffusion.lipschitz_c), growth.passed_lipschitz),
        ("jump_lipschitz", float(growth.jump_lipschitz_max),
         float(model.coeffs.jump.lipschitz_c), growth.passed_lipschitz),
        ("combined_lipschitz", float(growth.combined_lipschitz_max),
         float(growth.declared_c), growth.passed_lipschitz),
        ("growth", float(growth.growth_max), float(growth.declared_d), growth.passed_growth),
    ]
    _write_csv(
        out / "hypothesis_checks.csv", "mildsde-hypothesis-v1",
        ["check", "observed", "declared", "passed"], rows,
    )
    passed = mono.passed and growth.passed
    summary = RunSummary(
        command="hypothesis-check",
        config=config,
        passed=passed,
        checks={"semimonotone": mono.passed, "lipschitz": growth.passed_lipschitz,
                "growth": growth.passed_growth},
        stats={"semimonotone_max_ratio": float(mono.max_ratio),
               "combined_lipschitz_max": float(growth.combined_lipschitz_max),
               "growth_max": float(growth.growth_max)},
        wall_clock_s=time.perf_counter() - t_start,
    )
    summary.write(out)
    return summary


# ---------------------------------------------------------------------------
# direct path dump


def run_simulate(config: RunConfig) -> RunSummary:
    t_start = time.perf_counter()
    model = model_from_config(config)
    grid = config.grid()
    out = Path(config.out_dir)

    def chunk(path_range):
        noise = draw_noise(model, grid, config.seed, path_range)
        res = direct_solve_batch(model, grid, noise=noise)
        return res.values

    values = np.concatenate(
        _run_chunks(chunk, config.paths, config.chunk_size, config.threads), axis=0
    )
    k = min(config.dump_paths, config.paths)
    rows = []
    for p in range(k):
        for j in range(grid.n_steps + 1):
            rows.append((p, float(grid.times[j]), *[float(v) for v in values[p, j]]))
    _write_csv(
        out / "simulate_paths.csv", "mildsde-simulate-v1",
        ["path", "t"] + [f"x{i}" for i in range(model.dim)], rows,
    )
    terminal = np.sqrt(weighted_norm_sq(values[:, -1, :], model.weights))
    summary = RunSummary(
        command="simulate",
        config=config,
        passed=True,
        checks={},
        stats={"terminal_norm_mean": float(terminal.mean()),
               "terminal_norm_max": float(terminal.max()), "paths": config.paths},
        wall_clock_s=time.perf_counter() - t_start,
    )
    summary.write(out)
    return summary


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "picard": run_picard_campaign,
    "ito-check": run_ito_check,
    "benchmark": run_benchmark_oracle,
    "hypothesis-check": run_hypothesis_check,
    "simulate": run_simulate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mildsde", description="simulation and verification campaigns"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON config file")
        cmd.add_argument("--seed", type=int, help="master seed override")
        cmd.add_argument("--out", help="output directory override")
        cmd.add_argument("--threads", type=int, help="worker thread override")
    args = parser.parse_args(argv)

    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides:
            config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        summary = _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PicardDivergenceError, InnerIterationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    print(summary.to_text(), end="")
    return EXIT_OK if summary.passed else EXIT_DIAGNOSTIC


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
