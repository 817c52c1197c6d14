import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ch6relax.potential import (F_eval, PotentialSpec, beta_eval, beta_hat, classical, f_eval,
                                linear, validate_assumptions)

specs = st.builds(
    lambda coeffs, lam, nu, sigma: PotentialSpec(tuple(coeffs), lam, nu, sigma),
    st.lists(st.tuples(st.sampled_from([3, 5, 7]), st.floats(0.01, 3.0)), min_size=1, max_size=3),
    st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(0.01, 2.0),
)


@pytest.mark.parametrize("s, order, expected", [
    (1.0, 0, 1.0),
    (0.0, 2, 0.0),
    (2.0, 1, 12.0),
    (2.0, 2, 12.0),
    (-3.0, 3, 6.0),
])
def test_beta_eval_classical(s, order, expected):
    assert beta_eval(classical(), s, order) == expected


def test_beta_eval_rejects_bad_order():
    with pytest.raises(ValueError, match="order"):
        beta_eval(classical(), 0.3, 4)


@pytest.mark.parametrize("s, expected", [(1.0, 0.5), (0.0, 0.25), (-1.0, 0.5)])
def test_beta_hat_classical(s, expected):
    assert beta_hat(classical(), s) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("s, f, F", [(1.0, 0.0, 0.0), (0.0, 0.0, 0.25), (0.5, -0.375, 0.140625)])
def test_f_and_F_classical(s, f, F):
    p = classical()
    assert f_eval(p, s) == pytest.approx(f, abs=1e-15)
    assert F_eval(p, s) == pytest.approx(F, abs=1e-15)


def test_classical_F_is_double_well():
    s = np.linspace(-2, 2, 4001)
    np.testing.assert_allclose(F_eval(classical(), s), 0.25 * (s**2 - 1) ** 2, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(specs)
def test_derivative_chain_by_central_differences(spec):
    s = np.linspace(-5, 5, 41)
    h = 1e-5
    fd = (F_eval(spec, s + h) - F_eval(spec, s - h)) / (2 * h)
    exact = f_eval(spec, s)
    np.testing.assert_allclose(fd, exact, rtol=1e-6, atol=1e-6 * np.max(np.abs(exact)))
    for k in range(3):
        fd = (beta_eval(spec, s + h, k) - beta_eval(spec, s - h, k)) / (2 * h)
        exact = beta_eval(spec, s, k + 1)
        np.testing.assert_allclose(fd, exact, rtol=1e-6, atol=1e-6 * np.max(np.abs(exact)))


@settings(max_examples=30, deadline=None)
@given(specs)
def test_structural_zeros(spec):
    assert beta_eval(spec, 0.0) == 0.0
    assert beta_eval(spec, 0.0, 2) == 0.0
    assert validate_assumptions(spec).ok


@pytest.mark.parametrize("kwargs, match", [
    (dict(beta_coeffs=((2, 1.0),)), "odd"),
    (dict(beta_coeffs=((1, 1.0),)), "odd"),
    (dict(beta_coeffs=((3, -1.0),)), "positive"),
    (dict(beta_coeffs=()), "nonzero"),
    (dict(sigma=0.0), "sigma"),
    (dict(lam=-1.0), "lam"),
])
def test_spec_rejects_invalid_parameters(kwargs, match):
    with pytest.raises(ValueError, match=match):
        PotentialSpec(**kwargs)


def test_diagnostic_mode_admits_degenerate_cases():
    p = PotentialSpec((), sigma=0.0, diagnostic=True)
    assert p.degree == 1
    assert linear().beta_coeffs == ()
    with pytest.raises(ValueError):
        PotentialSpec(((-1, 1.0),), diagnostic=True)


def test_validate_classical():
    rep = validate_assumptions(classical(), (-10, 10), 101)
    assert rep.ok and rep.zero_at_origin and rep.beta3_nonnegative and rep.superlinear
    # max of 6|s| / (3 s^2 + 1) on the 0.2-spaced grid is attained at s = 0.6
    assert rep.c_beta == pytest.approx(3.6 / 2.08, rel=1e-14)
    assert rep.min_beta3 == 6.0


def test_validate_flags_constant_term():
    raw = PotentialSpec(((0, 0.5), (3, 1.0)), diagnostic=True)
    rep = validate_assumptions(raw)
    assert not rep.zero_at_origin
    assert not rep.ok
    assert rep.diagnostic


def test_validate_quintic():
    rep = validate_assumptions(PotentialSpec(((3, 1.0), (5, 1.0))), (-5, 5), 101)
    assert rep.ok


def test_validate_flags_sublinear_growth():
    rep = validate_assumptions(PotentialSpec(((1, 1.0),), diagnostic=True))
    assert not rep.superlinear


def test_validate_flags_negative_third_derivative():
    rep = validate_assumptions(PotentialSpec(((3, -1.0),), diagnostic=True))
    assert not rep.beta3_nonnegative
    assert rep.min_beta3 == -6.0


@pytest.mark.parametrize("rng_args", [((1, 1), 11), ((-1, 2), 2)])
def test_validate_argument_checks(rng_args):
    with pytest.raises(ValueError):
        validate_assumptions(classical(), *rng_args)
