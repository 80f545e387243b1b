"""Increment samplers and moment-condition validation."""

import numpy as np
import pytest
from scipy import stats

from levyem.errors import ConfigurationError
from levyem.noise import (
    JumpLaw,
    NoiseSpec,
    SeedPolicy,
    increment_characteristic_function,
    make_rng,
    sample_alpha_stable,
    sample_brownian_increments,
    sample_compound_poisson,
    sample_levy_increments,
    sample_tempered_stable,
    validate_moment_conditions,
)

BM_SPEC = NoiseSpec(kind="none", brownian_dim=1)


# ---------------------------------------------------------------------------
# Brownian increments


def test_brownian_moments_at_1e6():
    draw = sample_brownian_increments(BM_SPEC, 1.0, 1_000_000, SeedPolicy(1, 0, "brownian"))
    assert draw.shape == (1_000_000, 1)
    assert abs(draw.mean()) < 4e-3
    assert abs(draw.var() - 1.0) < 0.01


def test_brownian_rejects_bad_requests():
    with pytest.raises(ConfigurationError):
        sample_brownian_increments(BM_SPEC, 1.0, 0, SeedPolicy(1, 0, "brownian"))
    with pytest.raises(ConfigurationError):
        sample_brownian_increments(BM_SPEC, 0.0, 10, SeedPolicy(1, 0, "brownian"))


def test_brownian_determinism():
    a = sample_brownian_increments(BM_SPEC, 0.5, 1000, SeedPolicy(7, 3, "brownian"))
    b = sample_brownian_increments(BM_SPEC, 0.5, 1000, SeedPolicy(7, 3, "brownian"))
    np.testing.assert_array_equal(a, b)


def test_streams_are_distinct():
    a = make_rng(SeedPolicy(7, 3, "brownian")).standard_normal(100)
    b = make_rng(SeedPolicy(7, 3, "levy")).standard_normal(100)
    c = make_rng(SeedPolicy(7, 4, "brownian")).standard_normal(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# Alpha-stable


def test_stable_ecf_against_closed_form():
    # alpha = 1.5, scale = 1, dt = 1, n = 1e6; CF is exp(-|u|**1.5)
    draw = sample_alpha_stable(1.5, 1.0, 1.0, 1_000_000, SeedPolicy(5, 0, "levy"))
    for u in (0.25, 0.5, 1.0, 2.0):
        cos_u = np.cos(u * draw)
        se = cos_u.std(ddof=1) / np.sqrt(cos_u.size)
        gap = abs(cos_u.mean() - np.exp(-np.abs(u) ** 1.5))
        assert gap <= 3.0 * se, f"u={u}: gap {gap:.2e} > 3*stderr {3 * se:.2e}"


def test_stable_alpha2_reduces_to_gaussian():
    # scale 1/sqrt(2) at alpha=2 has variance 2*scale^2 = 1
    draw = sample_alpha_stable(2.0, 1.0 / np.sqrt(2.0), 1.0, 100_000, SeedPolicy(6, 0, "levy"))
    gauss = np.random.default_rng(123).standard_normal(100_000)
    assert stats.ks_2samp(draw, gauss).pvalue > 0.01


def test_stable_self_similarity():
    # one dt=1/4 increment vs the sum of four dt=1/16 increments
    n = 100_000
    one = sample_alpha_stable(1.5, 1.0, 0.25, n, SeedPolicy(8, 0, "levy"))
    fine = sample_alpha_stable(1.5, 1.0, 1.0 / 16.0, 4 * n, SeedPolicy(9, 0, "levy"))
    summed = fine.reshape(n, 4).sum(axis=1)
    assert stats.ks_2samp(one, summed).pvalue > 0.01


def test_stable_scale_enters_as_dt_power():
    # scale*dt**(1/alpha) scaling: dt=16, alpha=2 doubles the dt=4 spread
    a = sample_alpha_stable(2.0, 1.0, 4.0, 50_000, SeedPolicy(10, 0, "levy"))
    b = sample_alpha_stable(2.0, 1.0, 16.0, 50_000, SeedPolicy(10, 0, "levy"))
    np.testing.assert_allclose(b, 2.0 * a)


def test_stable_rejects_bad_alpha():
    with pytest.raises(ConfigurationError):
        sample_alpha_stable(2.5, 1.0, 1.0, 10, SeedPolicy(1, 0, "levy"))
    with pytest.raises(ConfigurationError):
        sample_alpha_stable(0.0, 1.0, 1.0, 10, SeedPolicy(1, 0, "levy"))


# ---------------------------------------------------------------------------
# Tempered stable


def test_tempering_lightens_tails():
    heavy = sample_tempered_stable(1.3, 1.0, 1.0, 1.0, 100_000, SeedPolicy(11, 0, "levy"))
    light = sample_tempered_stable(1.3, 1000.0, 1.0, 1.0, 100_000, SeedPolicy(12, 0, "levy"))
    assert light.var() < heavy.var()


def test_tempering_fourth_moment_monotone():
    lams = [0.5, 1.0, 2.0, 4.0]
    fourths, stderrs = [], []
    for i, lam in enumerate(lams):
        draw = sample_tempered_stable(1.3, lam, 1.0, 1.0, 100_000, SeedPolicy(13, i, "levy"))
        x4 = draw ** 4
        fourths.append(x4.mean())
        stderrs.append(x4.std(ddof=1) / np.sqrt(x4.size))
    for j in range(len(lams) - 1):
        slack = 3.0 * float(np.hypot(stderrs[j], stderrs[j + 1]))
        assert fourths[j + 1] < fourths[j] + slack, (
            f"4th moment not decreasing at lambda={lams[j]} -> {lams[j + 1]}: "
            f"{fourths[j]:.3f} -> {fourths[j + 1]:.3f}"
        )


def test_tempered_exponential_moment_oracle(tempered_13_draw_1e6, tempered_13_oracle_1e7):
    for theta in (0.1, 0.2):
        main = np.exp(theta * tempered_13_draw_1e6)
        oracle = np.exp(theta * tempered_13_oracle_1e7)
        assert np.all(np.isfinite(main))
        se = float(
            np.hypot(
                main.std(ddof=1) / np.sqrt(main.size),
                oracle.std(ddof=1) / np.sqrt(oracle.size),
            )
        )
        gap = abs(main.mean() - oracle.mean())
        assert gap <= 3.0 * se, f"theta={theta}: gap {gap:.3e} > {3 * se:.3e}"


def test_tempered_acceptance_ratio_bounded():
    _, acc = sample_tempered_stable(
        1.3, 1.0, 1.0, 1.0, 10_000, SeedPolicy(14, 0, "levy"), with_stats=True
    )
    assert 0.0 < acc.ratio <= 1.0


def test_tempered_variance_matches_subordination_identity():
    # Var X = scale^2 * dt * rho * theta**(rho-1), rho = alpha/2, theta = lambda^2/2
    alpha, lam, scale, dt = 1.3, 1.0, 2.0, 0.5
    draw = sample_tempered_stable(alpha, lam, scale, dt, 400_000, SeedPolicy(15, 0, "levy"))
    rho, theta = alpha / 2.0, lam ** 2 / 2.0
    target = scale ** 2 * dt * rho * theta ** (rho - 1.0)
    assert abs(draw.var(ddof=1) - target) / target < 0.05


# ---------------------------------------------------------------------------
# Compound Poisson


def test_compound_poisson_thinning():
    law = JumpLaw(kind="point", c=1.0)
    dt, rate, n = 1e-3, 2.0, 200_000
    draw = sample_compound_poisson(rate, law, dt, n, SeedPolicy(16, 0, "levy"), centered=False)
    frac = np.mean(draw != 0.0)
    p = rate * dt
    se = np.sqrt(p * (1 - p) / n)
    assert abs(frac - p) <= 3.0 * se + 0.5 * p ** 2  # double-jump correction


def test_compound_poisson_wald_mean():
    law = JumpLaw(kind="point", c=1.0)
    draw = sample_compound_poisson(2.0, law, 1.0, 100_000, SeedPolicy(17, 0, "levy"), centered=False)
    se = draw.std(ddof=1) / np.sqrt(draw.size)
    assert abs(draw.mean() - 2.0) <= 3.0 * se


def test_compound_poisson_centering():
    law = JumpLaw(kind="uniform", a=0.0, b=2.0)
    draw = sample_compound_poisson(3.0, law, 1.0, 100_000, SeedPolicy(18, 0, "levy"), centered=True)
    se = draw.std(ddof=1) / np.sqrt(draw.size)
    assert abs(draw.mean()) <= 3.0 * se


# ---------------------------------------------------------------------------
# Characteristic-function helper and dispatcher


@pytest.mark.parametrize(
    "spec",
    [
        NoiseSpec(kind="alpha_stable", alpha=1.3, scale=1.5, gamma0=1.4, gamma_inf=1.2, brownian_dim=0),
        NoiseSpec(kind="tempered_stable", alpha=1.3, tempering=1.0, scale=2.0, gamma0=1.3, gamma_inf=4.0),
        NoiseSpec(
            kind="compound_poisson",
            rate=2.0,
            jump_law=JumpLaw(kind="normal", mu=0.5, sigma=1.0),
            gamma0=1.0,
            gamma_inf=4.0,
        ),
    ],
    ids=["stable", "tempered", "cpois"],
)
def test_cf_helper_matches_sampler(spec):
    t, n = 0.5, 300_000
    draw = sample_levy_increments(spec, t, n, SeedPolicy(19, 0, "levy"))
    u = np.array([0.4, 1.1, 2.3])
    emp = np.exp(1j * u[:, None] * draw[None, :]).mean(axis=1)
    theo = increment_characteristic_function(spec, u, t)
    assert np.all(np.abs(emp - theo) * np.sqrt(n) < 4.5)


def test_cf_at_zero_is_one():
    spec = NoiseSpec(kind="tempered_stable", alpha=1.3, tempering=1.0, gamma0=1.3, gamma_inf=4.0)
    assert increment_characteristic_function(spec, [0.0], 1.0)[0] == pytest.approx(1.0)


def test_dispatcher_none_is_zero():
    out = sample_levy_increments(NoiseSpec(kind="none"), 0.1, 5, SeedPolicy(1, 0, "levy"))
    np.testing.assert_array_equal(out, np.zeros(5))


# ---------------------------------------------------------------------------
# NoiseSpec validation and moment conditions


def test_spec_validation_errors():
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="mystery")
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="alpha_stable", alpha=1.5, gamma0=0.5)
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="alpha_stable", alpha=1.5, gamma_inf=1.0)
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="tempered_stable", alpha=1.3, tempering=0.0)
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="compound_poisson", rate=-1.0, jump_law=JumpLaw(kind="point"))


def test_moment_conditions_tempered_pass_pass():
    spec = NoiseSpec(kind="tempered_stable", alpha=1.3, tempering=1.0, gamma0=1.5, gamma_inf=4.0)
    report = validate_moment_conditions(spec)
    assert report.small_jump_ok and report.large_jump_ok and report.passed


def test_moment_conditions_stable_pass_fail():
    spec = NoiseSpec(
        kind="alpha_stable", alpha=1.5, gamma0=1.6, gamma_inf=2.0, brownian_dim=0
    )
    report = validate_moment_conditions(spec)
    assert report.small_jump_ok
    assert not report.large_jump_ok
    assert "infinity" in report.large_jump_reason or "invariant" in report.large_jump_reason


def test_moment_conditions_stable_small_jump_strict():
    spec = NoiseSpec(
        kind="alpha_stable", alpha=1.5, gamma0=1.5, gamma_inf=1.2, brownian_dim=0
    )
    assert not validate_moment_conditions(spec).small_jump_ok


def test_moment_conditions_none_vacuous():
    assert validate_moment_conditions(NoiseSpec(kind="none")).passed


def test_heavy_tail_flag():
    stable = NoiseSpec(kind="alpha_stable", alpha=1.5, gamma0=1.6, gamma_inf=2.0, brownian_dim=0)
    tempered = NoiseSpec(kind="tempered_stable", alpha=1.3, tempering=1.0, gamma0=1.3, gamma_inf=4.0)
    assert stable.heavy_tailed
    assert not tempered.heavy_tailed
