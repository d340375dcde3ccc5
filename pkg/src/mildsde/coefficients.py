"""Coefficient triples (drift, diffusion, jump) with declared constants and
statistical checkers for the contracts the solver relies on.

Evaluator conventions (all batch-friendly along leading axes):

* drift:      ``f(t, x)``        with x of shape (..., dim) -> (..., dim)
* diffusion:  ``g(t, x)``        -> (..., modes, dim), one column per Wiener mode
* jump:       ``k(t, xi, x)``    with scalar mark xi, x (..., dim) -> (..., dim)
* jump compensator: ``(t, x) -> (..., dim)``, the intensity integral of k

Constants are declared by the builder and verified by sampling, never
estimated: the predicted iteration bounds need them as inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .noise import MarkSpaceSpec
from .state_space import WeightedInnerProduct, weighted_norm_sq

__all__ = [
    "AliasingError",
    "DriftSpec",
    "DiffusionSpec",
    "JumpCoeffSpec",
    "CoefficientSet",
    "zero_diffusion",
    "zero_jump",
    "nemitsky_sine",
    "bracketed_scalar_implicit",
    "nemitsky_implicit_solver",
    "pointwise_implicit_solver",
    "SemimonotoneReport",
    "GrowthReport",
    "check_semimonotone",
    "check_lipschitz_growth",
]


class AliasingError(ValueError):
    """Quadrature grid too coarse to resolve the retained modes."""


@dataclass(eq=False)
class DriftSpec:
    """Drift evaluator with declared semimonotonicity and growth constants.

    The contract is ``<f(t,x)-f(t,y), x-y> <= semimonotone_m * ||x-y||^2`` and
    ``||f(t,x)||^2 <= growth_d * (1 + ||x||^2)`` in the model's weighted norm.

    ``implicit_step(t, b, dt, tol)`` optionally solves the per-step equation
    x = b + dt f(t, x) exactly for drifts that know their own structure
    (pointwise compositions reduce to bracketed scalar root finding, which is
    immune to unbounded local slopes); it returns ``(x, converged_mask)``.
    The solvers fall back to damped fixed-point iteration when it is absent
    or fails on some rows.
    """

    evaluate: Callable[[float, np.ndarray], np.ndarray]
    semimonotone_m: float
    growth_d: float
    implicit_step: Callable | None = None


@dataclass(eq=False)
class DiffusionSpec:
    """Hilbert-Schmidt diffusion stored as a family of mode columns."""

    evaluate: Callable[[float, np.ndarray], np.ndarray]
    modes: int
    lipschitz_c: float
    growth_d: float

    @property
    def is_zero(self) -> bool:
        return self.modes == 0


@dataclass(eq=False)
class JumpCoeffSpec:
    """Jump coefficient with its intensity-integral compensator.

    ``lipschitz_c`` bounds the intensity integral of ||k(t,xi,x)-k(t,xi,y)||^2
    by lipschitz_c * ||x-y||^2; ``growth_d`` bounds the intensity integral of
    ||k(t,xi,x)||^2 by growth_d * (1 + ||x||^2).
    """

    evaluate: Callable[[float, float, np.ndarray], np.ndarray]
    compensator: Callable[[float, np.ndarray], np.ndarray]
    lipschitz_c: float
    growth_d: float
    is_zero: bool = False


@dataclass(eq=False)
class CoefficientSet:
    """The full triple; aggregate constants are sums of the parts."""

    drift: DriftSpec
    diffusion: DiffusionSpec
    jump: JumpCoeffSpec

    @property
    def semimonotone_m(self) -> float:
        return self.drift.semimonotone_m

    @property
    def lipschitz_c(self) -> float:
        return self.diffusion.lipschitz_c + self.jump.lipschitz_c

    @property
    def growth_d(self) -> float:
        return self.drift.growth_d + self.diffusion.growth_d + self.jump.growth_d


def zero_diffusion(dim: int) -> DiffusionSpec:
    def evaluate(t, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (0, dim))

    return DiffusionSpec(evaluate=evaluate, modes=0, lipschitz_c=0.0, growth_d=0.0)


def zero_jump(dim: int) -> JumpCoeffSpec:
    def evaluate(t, xi, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def compensator(t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return JumpCoeffSpec(
        evaluate=evaluate, compensator=compensator,
        lipschitz_c=0.0, growth_d=0.0, is_zero=True,
    )


def sine_quadrature(n_modes: int, n_quad: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes on (0,1) and the synthesis matrix of the sine basis.

    With n_quad midpoints the discrete sine modes are exactly orthonormal
    under the midpoint rule as long as every retained mode index stays below
    n_quad, so synthesis followed by projection is the exact identity.
    """
    nodes = (np.arange(n_quad) + 0.5) / n_quad
    ks = np.arange(1, n_modes + 1)
    synthesis = np.sqrt(2.0) * np.sin(np.pi * np.outer(nodes, ks))
    return nodes, synthesis


def nemitsky_sine(
    scalar_fn: Callable[[np.ndarray], np.ndarray],
    n_modes: int,
    n_quad: int | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise composition operator lifted to sine coefficients on (0,1).

    Synthesizes the function on a midpoint quadrature grid, applies
    ``scalar_fn`` pointwise, and projects back. Grids coarser than twice the
    mode count alias and are rejected. The returned callable maps coefficient
    arrays of shape (..., n_modes) to the same shape and has no explicit time
    argument (compose into a DriftSpec evaluator as needed).
    """
    if n_quad is None:
        n_quad = 2 * n_modes
    if n_quad < 2 * n_modes:
        raise AliasingError(
            f"{n_quad} quadrature points cannot resolve {n_modes} sine modes; "
            f"need at least {2 * n_modes}"
        )
    _, synthesis = sine_quadrature(n_modes, n_quad)
    projection = synthesis / n_quad

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pointwise = scalar_fn(x @ synthesis.T)
        return pointwise @ projection

    return evaluate


def bracketed_scalar_implicit(
    scalar_fn: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    dt: float,
    growth: tuple[float, float],
    n_bisect: int = 72,
) -> np.ndarray:
    """Componentwise solve of u = v + dt * scalar_fn(u) for decreasing scalar_fn.

    The residual u - dt*scalar_fn(u) - v is strictly increasing, so bisection
    on the a-priori root bracket |u| <= (|v| + dt*a) / (1 - dt*b) converges
    unconditionally regardless of local slope; ``growth = (a, b)`` declares
    |scalar_fn(s)| <= a + b|s| and requires dt*b < 1.
    """
    a, b = growth
    if dt * b >= 1.0:
        raise ValueError(f"step {dt} too large for growth slope {b}")
    v = np.asarray(v, dtype=float)
    bound = (np.abs(v) + dt * a) / (1.0 - dt * b) + 1e-12
    lo, hi = -bound, bound.copy()
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        negative = mid - dt * scalar_fn(mid) - v < 0.0
        lo = np.where(negative, mid, lo)
        hi = np.where(negative, hi, mid)
    return 0.5 * (lo + hi)


def nemitsky_implicit_solver(
    scalar_fn: Callable[[np.ndarray], np.ndarray],
    n_modes: int,
    n_quad: int | None = None,
    growth: tuple[float, float] = (1.0, 1.0),
    linear_shift: float = 0.0,
    max_outer: int = 60,
    scalar_prox: Callable[[np.ndarray, float], np.ndarray] | None = None,
):
    """Implicit-step solver for drifts of the form P phi(E x) + shift * x.

    Works in the quadrature domain: with the projection correction frozen the
    equation decouples into scalar monotone roots (exact via bisection); the
    outer loop updates the correction, which the projection contracts. Returns
    a callable ``(t, b, dt, tol) -> (x, converged_mask)`` over batched rows.
    """
    if n_quad is None:
        n_quad = 2 * n_modes
    if n_quad < 2 * n_modes:
        raise AliasingError(
            f"{n_quad} quadrature points cannot resolve {n_modes} sine modes"
        )
    _, synthesis = sine_quadrature(n_modes, n_quad)

    def evaluate_f(x):
        return scalar_fn(x @ synthesis.T) @ synthesis / n_quad + linear_shift * x

    def solve_scalar(v, dte):
        if scalar_prox is not None:
            return scalar_prox(v, dte)
        return bracketed_scalar_implicit(scalar_fn, v, dte, growth)

    dust_cache: dict[float, float] = {}

    def dust_scale(dt):
        """Scale s solving s = dt * |phi(s) - phi(0)|: states below it are
        inside the implicit step's own attraction basin, where the decreasing
        drift self-limits perturbations (finite-time extinction), so residuals
        that are a small fraction of this scale cannot move any statistic
        above the scheme's strong error."""
        s = dust_cache.get(dt)
        if s is None:
            p0 = float(scalar_fn(np.zeros(1))[0])
            s = dt * (growth[0] + 1.0)
            for _ in range(60):
                varn = max(
                    abs(float(scalar_fn(np.array([s]))[0]) - p0),
                    abs(float(scalar_fn(np.array([-s]))[0]) - p0),
                )
                s_new = dt * varn
                if s_new <= 0.0 or abs(s_new - s) <= 1e-3 * s:
                    s = s_new
                    break
                s = s_new
            dust_cache[dt] = s
        return s

    def step(t, b, dt, tol):
        den = 1.0 - dt * linear_shift
        if den <= 0.0:
            return b.copy(), np.zeros(b.shape[:-1], dtype=bool)
        bt = b / den
        dte = dt / den
        v = bt @ synthesis.T
        c = np.zeros_like(v)
        c_prev = f_prev = None
        x = bt
        rn = np.full(b.shape[:-1], np.inf)
        ok = np.zeros(b.shape[:-1], dtype=bool)
        for _ in range(max_outer):
            u = solve_scalar(v + dte * c, dte)
            pu = scalar_fn(u)
            x = bt + dte * (pu @ synthesis) / n_quad
            r = b + dt * evaluate_f(x) - x
            rn = np.sqrt(np.einsum("...d,...d->...", r, r))
            # The residual map is only Holder continuous at zeros of the
            # profile, so a machine-precision candidate can still show a
            # residual of order dt * (eps * scale)^(1/3). Accept at the
            # float-resolution floor estimated from a one-ulp perturbation.
            h = 4e-15 * np.max(np.abs(u), axis=-1, keepdims=True) + 1e-300
            dphi = (scalar_fn(u + h) - pu) @ synthesis / n_quad
            floor = dt * np.sqrt(np.einsum("...d,...d->...", dphi, dphi))
            accept_at = np.maximum(tol, np.maximum(8.0 * floor, dust_scale(dt) / 32.0))
            ok = rn <= accept_at
            if np.all(ok):
                break
            g = (pu @ synthesis / n_quad) @ synthesis.T - pu
            f_cur = g - c
            if c_prev is not None:
                # The correction map is nearly affine, so one-step Anderson
                # extrapolation collapses its slow dominant mode.
                df = f_cur - f_prev
                denom = np.einsum("...q,...q->...", df, df)
                theta = np.where(
                    denom > 1e-300,
                    np.einsum("...q,...q->...", f_cur, df) / np.where(denom > 1e-300, denom, 1.0),
                    0.0,
                )
                theta = np.clip(theta, -5.0, 5.0)[..., None]
                c_next = (1.0 - theta) * g + theta * (f_prev + c_prev)
            else:
                c_next = g
            c_prev, f_prev = c, f_cur
            c = c_next
        return x, ok

    return step


def pointwise_implicit_solver(
    scalar_fn: Callable[[np.ndarray], np.ndarray],
    component: int,
    growth: tuple[float, float] = (1.0, 1.0),
    linear_shift: float = 0.0,
    scalar_prox: Callable[[np.ndarray, float], np.ndarray] | None = None,
):
    """Exact implicit step for drifts acting on a single state component:
    f(x) = e_c (scalar_fn(x_c) + shift * x_c)."""

    def step(t, b, dt, tol):
        den = 1.0 - dt * linear_shift
        if den <= 0.0:
            return b.copy(), np.zeros(b.shape[:-1], dtype=bool)
        x = b.copy()
        vc = b[..., component] / den
        dte = dt / den
        if scalar_prox is not None:
            x[..., component] = scalar_prox(vc, dte)
        else:
            x[..., component] = bracketed_scalar_implicit(scalar_fn, vc, dte, growth)
        return x, np.ones(b.shape[:-1], dtype=bool)

    return step


@dataclass(frozen=True)
class SemimonotoneReport:
    declared_m: float
    max_ratio: float
    samples: int
    passed: bool


def _sample_pairs(rng, samples, dim, radius):
    """Half independent wide pairs, half tight perturbation pairs; the tight
    pairs probe local slopes that wide sampling misses."""
    n_wide = samples // 2
    n_tight = samples - n_wide
    scale = radius / np.sqrt(dim)
    xw = rng.standard_normal((n_wide, dim)) * scale
    yw = rng.standard_normal((n_wide, dim)) * scale
    xt = rng.standard_normal((n_tight, dim)) * scale
    yt = xt + rng.standard_normal((n_tight, dim)) * (1e-3 * scale)
    return np.vstack([xw, xt]), np.vstack([yw, yt])


def check_semimonotone(
    drift: DriftSpec,
    dim: int,
    weights: WeightedInnerProduct | np.ndarray | None = None,
    samples: int = 10_000,
    radius: float = 3.0,
    t_max: float = 1.0,
    seed: int = 0,
) -> SemimonotoneReport:
    """Sample pairs and compare <f(t,x)-f(t,y), x-y> / ||x-y||^2 to declared M."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if radius <= 0.0:
        raise ValueError("radius must be > 0")
    w = weights.weights if isinstance(weights, WeightedInnerProduct) else weights
    rng = np.random.default_rng(seed)
    xs, ys = _sample_pairs(rng, samples, dim, radius)
    max_ratio = -np.inf
    for t in rng.uniform(0.0, t_max, size=4):
        df = drift.evaluate(float(t), xs) - drift.evaluate(float(t), ys)
        dx = xs - ys
        num = np.einsum("...d,...d->...", df, dx) if w is None else np.einsum(
            "...d,d,...d->...", df, np.asarray(w, dtype=float), dx
        )
        den = weighted_norm_sq(dx, w)
        ok = den > 0
        if np.any(ok):
            max_ratio = max(max_ratio, float(np.max(num[ok] / den[ok])))
    return SemimonotoneReport(
        declared_m=drift.semimonotone_m,
        max_ratio=max_ratio,
        samples=samples,
        passed=bool(max_ratio <= drift.semimonotone_m + 1e-9),
    )


@dataclass(frozen=True)
class GrowthReport:
    diffusion_lipschitz_max: float
    jump_lipschitz_max: float
    combined_lipschitz_max: float
    growth_max: float
    declared_c: float
    declared_d: float
    samples: int
    jump_pairs: int
    jump_nodes: int
    passed_lipschitz: bool
    passed_growth: bool

    @property
    def passed(self) -> bool:
        return self.passed_lipschitz and self.passed_growth


def _hs_norm_sq(cols: np.ndarray, w: np.ndarray | None) -> np.ndarray:
    """Squared Hilbert-Schmidt norm of mode columns, shape (..., modes, dim)."""
    if cols.shape[-2] == 0:
        return np.zeros(cols.shape[:-2])
    if w is None:
        return np.einsum("...kd,...kd->...", cols, cols)
    return np.einsum("...kd,d,...kd->...", cols, np.asarray(w, dtype=float), cols)


def check_lipschitz_growth(
    coeffs: CoefficientSet,
    dim: int,
    weights: WeightedInnerProduct | np.ndarray | None = None,
    marks: MarkSpaceSpec | None = None,
    samples: int = 10_000,
    radius: float = 3.0,
    t_max: float = 1.0,
    seed: int = 0,
    jump_pairs: int = 256,
    jump_nodes: int = 4096,
) -> GrowthReport:
    """Empirical maxima of the Lipschitz and growth ratios versus declared C, D.

    The diffusion and growth ratios use the full pair sample; intensity
    integrals over the mark space use Monte Carlo nodes on a pair subsample
    (``jump_pairs`` x ``jump_nodes``) to keep the cost bounded.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    w = weights.weights if isinstance(weights, WeightedInnerProduct) else weights
    rng = np.random.default_rng(seed)
    xs, ys = _sample_pairs(rng, samples, dim, radius)
    t = float(rng.uniform(0.0, t_max))

    dx_sq = weighted_norm_sq(xs - ys, w)
    ok = dx_sq > 0

    # Diffusion Lipschitz ratio over all pairs.
    if coeffs.diffusion.is_zero:
        g_ratio = 0.0
        g_growth = np.zeros(samples)
    else:
        gx = coeffs.diffusion.evaluate(t, xs)
        gy = coeffs.diffusion.evaluate(t, ys)
        g_ratio = float(np.max(_hs_norm_sq(gx - gy, w)[ok] / dx_sq[ok]))
        g_growth = _hs_norm_sq(gx, w)

    # Jump Lipschitz and growth via mark-node quadrature on a subsample.
    if coeffs.jump.is_zero or marks is None or marks.rate == 0.0:
        k_ratio = 0.0
        k_growth = np.zeros(samples)
        n_pairs = 0
        n_nodes = 0
    else:
        n_pairs = min(jump_pairs, samples)
        rng_nodes = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(1,))
        )
        nodes = np.asarray(marks.sample_marks(rng_nodes, jump_nodes))
        n_nodes = len(nodes)
        xi_diff = np.zeros(n_pairs)
        xi_growth = np.zeros(n_pairs)
        xsub, ysub = xs[:n_pairs], ys[:n_pairs]
        for xi in nodes:
            kx = coeffs.jump.evaluate(t, float(xi), xsub)
            ky = coeffs.jump.evaluate(t, float(xi), ysub)
            xi_diff += weighted_norm_sq(kx - ky, w)
            xi_growth += weighted_norm_sq(kx, w)
        xi_diff *= marks.rate / n_nodes
        xi_growth *= marks.rate / n_nodes
        ok_sub = dx_sq[:n_pairs] > 0
        k_ratio = float(np.max(xi_diff[ok_sub] / dx_sq[:n_pairs][ok_sub]))
        k_growth = np.concatenate([xi_growth, np.zeros(samples - n_pairs)])

    fx = coeffs.drift.evaluate(t, xs)
    growth_num = weighted_norm_sq(fx, w) + g_growth + k_growth
    growth_max = float(np.max(growth_num / (1.0 + weighted_norm_sq(xs, w))))

    combined = g_ratio + k_ratio
    return GrowthReport(
        diffusion_lipschitz_max=g_ratio,
        jump_lipschitz_max=k_ratio,
        combined_lipschitz_max=combined,
        growth_max=growth_max,
        declared_c=coeffs.lipschitz_c,
        declared_d=coeffs.growth_d,
        samples=samples,
        jump_pairs=n_pairs,
        jump_nodes=n_nodes,
        passed_lipschitz=bool(
            g_ratio <= coeffs.diffusion.lipschitz_c * (1 + 1e-9) + 1e-12
            and k_ratio <= coeffs.jump.lipschitz_c * (1 + 0.05) + 1e-12
            and combined <= coeffs.lipschitz_c * (1 + 0.05) + 1e-12
        ),
        passed_growth=bool(growth_max <= coeffs.growth_d * (1 + 1e-9) + 1e-12),
    )
