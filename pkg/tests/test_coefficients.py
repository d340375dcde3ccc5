import numpy as np
import pytest

from mildsde.coefficients import (
    AliasingError,
    CoefficientSet,
    DriftSpec,
    JumpCoeffSpec,
    bracketed_scalar_implicit,
    check_lipschitz_growth,
    check_semimonotone,
    nemitsky_implicit_solver,
    nemitsky_sine,
    pointwise_implicit_solver,
    sine_quadrature,
    zero_diffusion,
    zero_jump,
)
from mildsde.models import cbrt_implicit_prox, decreasing_cbrt
from mildsde.noise import MarkSpaceSpec


def make_marks(rate=1.0, std=0.3, mean=0.0):
    return MarkSpaceSpec(
        rate=rate,
        sample_marks=lambda rng, size: rng.normal(mean, std, size=size),
        mark_second_moment=mean**2 + std**2,
        mark_mean=mean,
    )


def refined_projection(scalar_fn, x, n_modes, factor=10):
    """Reference projection of scalar_fn composed with the synthesized
    profile, on a quadrature grid ``factor`` times finer."""
    n_quad = 2 * n_modes * factor
    _, synth = sine_quadrature(n_modes, n_quad)
    return scalar_fn(x @ synth.T) @ synth / n_quad


def test_nemitsky_identity_exact():
    nem = nemitsky_sine(lambda u: u, 8)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 8))
    assert np.abs(nem(x) - x).max() <= 1e-8


def test_nemitsky_constant_projection():
    c = 0.7
    nem = nemitsky_sine(lambda u: c + 0.0 * u, 6, n_quad=64)
    out = nem(np.zeros(6))
    oracle = refined_projection(lambda u: c + 0.0 * u, np.zeros(6), 6, factor=40)
    assert np.abs(out - oracle).max() <= 1e-3
    # analytic sine coefficients of the constant: sqrt(2) c (1 - (-1)^k) / (k pi)
    ks = np.arange(1, 7)
    analytic = np.sqrt(2.0) * c * (1.0 - (-1.0) ** ks) / (ks * np.pi)
    assert out == pytest.approx(analytic, abs=5e-3)


def test_nemitsky_cbrt_against_refined_quadrature():
    n_modes = 8
    nem = nemitsky_sine(decreasing_cbrt, n_modes, n_quad=4 * n_modes)
    x = np.zeros(n_modes)
    x[0] = 1.3  # single sine mode
    out = nem(x)
    oracle = refined_projection(decreasing_cbrt, x, n_modes, factor=10)
    rel = np.linalg.norm(out - oracle) / np.linalg.norm(oracle)
    assert rel <= 1e-4 * 50  # smooth composition, midpoint rule converges fast
    assert rel <= 5e-3


def test_nemitsky_aliasing_rejected():
    with pytest.raises(AliasingError):
        nemitsky_sine(lambda u: u, 8, n_quad=15)


def test_semimonotone_nemitsky_cbrt_passes_zero():
    nem = nemitsky_sine(decreasing_cbrt, 8)
    drift = DriftSpec(evaluate=lambda t, x: nem(x), semimonotone_m=0.0, growth_d=8.0)
    rep = check_semimonotone(drift, 8, samples=10_000, seed=1)
    assert rep.passed
    assert rep.max_ratio <= 1e-9


def test_semimonotone_linear_ratio():
    drift = DriftSpec(evaluate=lambda t, x: -x, semimonotone_m=0.0, growth_d=1.0)
    rep = check_semimonotone(drift, 4, samples=2000, seed=2)
    assert rep.passed
    assert rep.max_ratio == pytest.approx(-1.0, abs=1e-9)


def test_semimonotone_cubic_fails():
    nem = nemitsky_sine(lambda u: u**3, 6)
    drift = DriftSpec(evaluate=lambda t, x: nem(x), semimonotone_m=0.0, growth_d=100.0)
    rep = check_semimonotone(drift, 6, samples=10_000, seed=3)
    assert not rep.passed
    assert rep.max_ratio > 0.0


def test_affine_shift_of_monotone_map():
    # adding eta * identity to a decreasing pointwise map shifts M to eta
    nem = nemitsky_sine(decreasing_cbrt, 8)
    eta = 0.5
    drift = DriftSpec(
        evaluate=lambda t, x: nem(x) + eta * x, semimonotone_m=eta, growth_d=10.0
    )
    rep = check_semimonotone(drift, 8, samples=10_000, seed=4)
    assert rep.passed
    assert rep.max_ratio <= eta + 1e-9
    bad = DriftSpec(evaluate=drift.evaluate, semimonotone_m=0.0, growth_d=10.0)
    assert not check_semimonotone(bad, 8, samples=10_000, seed=4).passed


def test_growth_zero_coefficients():
    dim = 5
    coeffs = CoefficientSet(
        DriftSpec(evaluate=lambda t, x: 0.0 * x, semimonotone_m=0.0, growth_d=0.0),
        zero_diffusion(dim),
        zero_jump(dim),
    )
    rep = check_lipschitz_growth(coeffs, dim, samples=2000, seed=5)
    assert rep.passed
    assert rep.combined_lipschitz_max == 0.0
    assert rep.growth_max == 0.0


def test_linear_jump_ratio_matches_second_moment():
    dim = 4
    marks = make_marks(rate=2.0, std=0.3, mean=0.1)
    c_true = marks.rate * marks.mark_second_moment
    coeffs = CoefficientSet(
        DriftSpec(evaluate=lambda t, x: 0.0 * x, semimonotone_m=0.0, growth_d=0.0),
        zero_diffusion(dim),
        JumpCoeffSpec(
            evaluate=lambda t, xi, x: xi * x,
            compensator=lambda t, x: marks.rate * 0.1 * x,
            lipschitz_c=c_true,
            growth_d=c_true,
        ),
    )
    rep = check_lipschitz_growth(
        coeffs, dim, marks=marks, samples=2000, seed=6, jump_nodes=20_000
    )
    assert rep.passed
    assert rep.jump_lipschitz_max == pytest.approx(c_true, rel=0.05)


def test_affine_drift_growth_bound():
    # f(x) = A x + b with ||A|| = L: growth ratio <= 2 L^2 + 2 ||b||^2
    rng = np.random.default_rng(7)
    dim = 6
    raw = rng.standard_normal((dim, dim))
    slope = raw / np.linalg.norm(raw, 2) * 1.5
    offset = rng.standard_normal(dim) * 0.5
    bound = 2 * 1.5**2 + 2 * float(offset @ offset)
    coeffs = CoefficientSet(
        DriftSpec(
            evaluate=lambda t, x: x @ slope.T + offset,
            semimonotone_m=1.5,
            growth_d=bound,
        ),
        zero_diffusion(dim),
        zero_jump(dim),
    )
    rep = check_lipschitz_growth(coeffs, dim, samples=10_000, seed=8)
    assert rep.passed_growth


def test_hilbert_schmidt_norm_two_ways():
    rng = np.random.default_rng(9)
    dim, modes = 5, 3
    cols = rng.standard_normal((modes, dim))
    w = rng.uniform(0.5, 2.0, dim)
    by_columns = sum(float(np.dot(c * w, c)) for c in cols)
    direct = float(np.einsum("kd,d,kd->", cols, w, cols))
    assert by_columns == pytest.approx(direct, rel=1e-12)


def test_bracketed_scalar_solve_exact():
    rng = np.random.default_rng(10)
    v = rng.standard_normal(100) * 10.0 ** rng.uniform(-8, 1, 100)
    dt = 1e-2
    u = bracketed_scalar_implicit(decreasing_cbrt, v, dt, (1.0, 1.0))
    res = np.abs(u + dt * np.cbrt(u) - v)
    assert res.max() <= 1e-12


def test_cbrt_prox_all_scales():
    rng = np.random.default_rng(11)
    v = np.concatenate(
        [10.0 ** rng.uniform(-300, 2, 500) * rng.choice([-1, 1], 500), [0.0]]
    )
    for p in (1e-3, 1e-1):
        u = cbrt_implicit_prox(v, p)
        res = np.abs(u + p * np.cbrt(u) - v)
        assert res.max() <= 1e-13


def test_nemitsky_implicit_solver_accuracy():
    dim = 8
    step = nemitsky_implicit_solver(
        decreasing_cbrt, dim, growth=(1.0, 1.0), scalar_prox=cbrt_implicit_prox
    )
    _, synth = sine_quadrature(dim, 16)
    rng = np.random.default_rng(12)
    dt = 1e-3
    for scale in (1.0, 1e-2, 1e-5, 1e-9):
        b = rng.standard_normal((6, dim)) * scale
        x, ok = step(0.0, b, dt, 1e-9)
        assert ok.all()
        res = b + dt * (decreasing_cbrt(x @ synth.T) @ synth) / 16 - x
        # accepted at the tolerance or at the dust/float floor, both tiny
        assert np.linalg.norm(res, axis=1).max() <= 1e-6


def test_pointwise_solver_exact():
    step = pointwise_implicit_solver(
        decreasing_cbrt, component=0, growth=(1.0, 1.0), scalar_prox=cbrt_implicit_prox
    )
    b = np.array([[0.5, 2.0, -1.0], [1e-7, 0.0, 3.0]])
    x, ok = step(0.0, b, 0.01, 1e-12)
    assert ok.all()
    assert np.array_equal(x[:, 1:], b[:, 1:])
    res = x[:, 0] + 0.01 * np.cbrt(x[:, 0]) - b[:, 0]
    assert np.abs(res).max() <= 1e-14
