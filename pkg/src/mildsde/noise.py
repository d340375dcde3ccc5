"""Reproducible samplers for truncated Wiener increments, Poisson random
measures with finite activity, and square integrable jump processes.

All randomness flows through numpy Generators. Per-path streams are derived
from (master seed, path index) via SeedSequence spawn keys, so paths are
reproducible independently of batching or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "TimeGrid",
    "WienerSpec",
    "MarkSpaceSpec",
    "JumpEvent",
    "LevyPathSpec",
    "TruncatedMarkSpace",
    "truncate_small_jumps",
    "path_rng",
    "sample_wiener_increments",
    "sample_prm",
    "compensate",
]

# Fixed entropy for the quadrature node stream of mark-space integrals, so the
# cached integrals agree across processes and runs.
_QUADRATURE_ENTROPY = 0x6D61726B


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_m = horizon."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be > 0")
        if self.n_steps < 1:
            raise ValueError("grid needs at least one step")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.n_steps * factor)

    def cell_of(self, t: float) -> int:
        """Cell index whose half-open interval (t_j, t_{j+1}] contains t."""
        idx = math.ceil(t / self.dt) - 1
        return min(max(idx, 0), self.n_steps - 1)


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path, stable under batching."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_index),))
    return np.random.default_rng(seq)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class WienerSpec:
    """Finitely many independent scalar Wiener modes on a grid."""

    modes: int
    grid: TimeGrid

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one Wiener mode")


def sample_wiener_increments(spec: WienerSpec, seed) -> np.ndarray:
    """Increment table of shape (n_steps, modes), each entry N(0, dt).

    Identical seeds give identical tables; disjoint steps and distinct modes
    are independent.
    """
    rng = _as_rng(seed)
    return rng.standard_normal((spec.grid.n_steps, spec.modes)) * math.sqrt(spec.grid.dt)


class JumpEvent(NamedTuple):
    time: float
    mark: float


@dataclass(eq=False)
class MarkSpaceSpec:
    """Finite-activity mark space: total intensity mass plus a mark sampler.

    ``rate`` is the total mass of the intensity measure (jumps arrive as a
    Poisson process with this rate); ``sample_marks(rng, size)`` draws marks
    from the normalized intensity. ``mark_second_moment`` is the declared
    second moment of a single mark under that normalized law; ``mark_mean``
    may be declared when a closed form is known (used for exact compensators),
    otherwise it is estimated by the cached quadrature below.

    Integrals against the intensity measure are evaluated by Monte Carlo
    quadrature over a node set drawn once per instance from a fixed stream,
    and cached per integrand.
    """

    rate: float
    sample_marks: Callable[[np.random.Generator, int], np.ndarray]
    mark_second_moment: float
    mark_mean: float | None = None
    description: str = ""
    quadrature_samples: int = 10_000
    _nodes: np.ndarray | None = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError("intensity mass must be >= 0")
        if self.mark_second_moment < 0.0:
            raise ValueError("second moment must be finite and >= 0")

    def quadrature_nodes(self) -> np.ndarray:
        if self._nodes is None:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=_QUADRATURE_ENTROPY)
            )
            self._nodes = np.asarray(self.sample_marks(rng, self.quadrature_samples))
        return self._nodes

    def nu_integral(self, h: Callable[[float], np.ndarray]) -> np.ndarray:
        """Monte Carlo value of the intensity integral of h, cached per h."""
        cached = self._cache.get(h)
        if cached is not None:
            return cached
        if self.rate == 0.0:
            val = np.asarray(h(0.0), dtype=float) * 0.0
        else:
            nodes = self.quadrature_nodes()
            acc = np.asarray(h(float(nodes[0])), dtype=float).copy()
            for xi in nodes[1:]:
                acc += h(float(xi))
            val = self.rate * acc / len(nodes)
        self._cache[h] = val
        return val

    def mean_mark(self) -> float:
        """Declared mark mean if present, else the cached quadrature estimate."""
        if self.mark_mean is not None:
            return float(self.mark_mean)
        if self.rate == 0.0:
            return 0.0
        return float(np.mean(self.quadrature_nodes()))


def sample_prm(spec: MarkSpaceSpec, horizon: float, seed) -> list[JumpEvent]:
    """One realization of the Poisson random measure over (0, horizon].

    The event count is Poisson(rate * horizon), times are uniform order
    statistics, marks are i.i.d. from the normalized intensity. Zero rate
    gives the valid degenerate empty realization.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be > 0")
    rng = _as_rng(seed)
    if spec.rate == 0.0:
        return []
    count = int(rng.poisson(spec.rate * horizon))
    if count == 0:
        return []
    times = np.sort(rng.uniform(0.0, horizon, size=count))
    marks = np.asarray(spec.sample_marks(rng, count))
    return [JumpEvent(float(t), float(m)) for t, m in zip(times, marks)]


def compensate(
    events: Sequence[JumpEvent],
    h: Callable[[float], np.ndarray],
    spec: MarkSpaceSpec,
    grid: TimeGrid,
) -> np.ndarray:
    """Per-cell increments of the compensated jump integral of h.

    Cell j receives sum of h(mark) over events with time in (t_j, t_{j+1}]
    minus dt times the intensity integral of h (Monte Carlo quadrature,
    cached on the spec). Over many realizations each cell sum has mean zero.
    """
    mean_h = np.atleast_1d(spec.nu_integral(h))
    out = np.tile(-grid.dt * mean_h, (grid.n_steps, 1))
    for ev in events:
        out[grid.cell_of(ev.time)] += np.atleast_1d(np.asarray(h(ev.mark), dtype=float))
    return out


@dataclass(eq=False)
class TruncatedMarkSpace:
    """Finite-activity truncation of an infinite-activity jump measure.

    ``spec`` keeps the jumps with |mark| > epsilon; ``discarded_variance`` is
    the second moment of the removed small jumps, quantifying the truncation
    error (the driving process is square integrable, so it is finite).
    """

    spec: MarkSpaceSpec
    epsilon: float
    discarded_variance: float


def truncate_small_jumps(
    density: Callable[[np.ndarray], np.ndarray],
    epsilon: float,
    support: float = 50.0,
    grid_points: int = 4001,
) -> TruncatedMarkSpace:
    """Build a finite-activity mark space from a jump density by removing
    jumps with |mark| <= epsilon.

    The density is tabulated on symmetric log-spaced grids over
    [-support, -tiny] and [tiny, support]; the retained mass, moments and the
    inverse-CDF sampler come from trapezoidal quadrature, and the discarded
    small-jump variance is reported alongside. The density must be integrable
    against min(1, mark^2).
    """
    if epsilon <= 0.0:
        raise ValueError("truncation level must be > 0")
    tiny = epsilon * 1e-8
    half = np.geomspace(tiny, support, grid_points)
    xs = np.concatenate([-half[::-1], half])
    qs = np.asarray(density(xs), dtype=float)
    if np.any(qs < 0.0):
        raise ValueError("jump density must be nonnegative")

    def trapz(values, mask):
        v = np.where(mask, values, 0.0)
        return float(np.trapezoid(v, xs))

    kept = np.abs(xs) > epsilon
    rate = trapz(qs, kept)
    if rate <= 0.0:
        raise ValueError("no mass beyond the truncation level")
    mean = trapz(xs * qs, kept) / rate
    second = trapz(xs * xs * qs, kept) / rate
    discarded = trapz(xs * xs * qs, ~kept)

    cdf = np.concatenate([[0.0], np.cumsum(
        np.where(kept, qs, 0.0)[1:] * np.diff(xs)
        + 0.5 * np.diff(np.where(kept, qs, 0.0)) * np.diff(xs)
    )])
    cdf /= cdf[-1]

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.interp(rng.uniform(0.0, 1.0, size=size), cdf, xs)

    spec = MarkSpaceSpec(
        rate=rate,
        sample_marks=sample,
        mark_second_moment=second,
        mark_mean=mean,
        description=f"truncated density (epsilon={epsilon})",
    )
    return TruncatedMarkSpace(spec=spec, epsilon=epsilon, discarded_variance=discarded)


@dataclass(frozen=True, eq=False)
class LevyPathSpec:
    """Square integrable scalar jump process: drift + Gaussian part + jumps.

    The Gaussian part is routed to the Wiener channel of a model and the jump
    part to its Poisson channel, so one driving process covers both.
    """

    drift: float
    gaussian_variance: float
    jumps: MarkSpaceSpec

    def __post_init__(self):
        if self.gaussian_variance < 0.0:
            raise ValueError("gaussian variance must be >= 0")

    def second_moment(self) -> float:
        """E[Z_1^2] for the centered-jump convention (compensated jumps)."""
        return (
            self.drift**2
            + self.gaussian_variance
            + self.jumps.rate * self.jumps.mark_second_moment
        )
