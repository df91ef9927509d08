import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backstep.coefficients import (Basis, DomainError, FunctionDescriptor, ProblemSpec, compute_constants,
                                   eval_mu, validate_spec)

D = FunctionDescriptor


def test_mu_substitution():
    spec = ProblemSpec(lambda0=2.0, c1=D.of(("monomial", 1.0, 1.0)))
    assert eval_mu(spec, 0.5, 0.25) == pytest.approx(1.75, abs=1e-15)


def test_mu_sine():
    spec = ProblemSpec(lambda0=1.0, c1=D.of(("sine", 1.0, 1.0)))
    assert eval_mu(spec, 1.0, 0.0) == pytest.approx(1.0 - math.sin(1.0), abs=1e-15)
    assert eval_mu(spec, 1.0, 0.0) == pytest.approx(0.158529, abs=1e-6)


def test_mu_outside_triangle():
    spec = ProblemSpec(lambda0=1.0)
    with pytest.raises(DomainError):
        eval_mu(spec, 0.2, 0.5)
    with pytest.raises(DomainError):
        eval_mu(spec, 1.5, 0.0)


coef = st.floats(-3, 3, allow_nan=False)
unit = st.floats(0, 1, allow_nan=False)


@st.composite
def descriptors(draw, arity=1):
    kinds = ["constant", "monomial", "sine", "cosine", "exponential"]
    terms = []
    for _ in range(draw(st.integers(0, 3))):
        kind = draw(st.sampled_from(kinds))
        param = draw(st.floats(0, 4)) if kind == "monomial" else draw(coef)
        axis = draw(st.integers(0, arity - 1))
        terms.append((kind, draw(coef), param, axis))
    return D.of(*terms, arity=arity)


@given(descriptors(), st.floats(0, 5), unit)
def test_mu_diagonal(c1, lam, x):
    spec = ProblemSpec(lambda0=lam, c1=c1)
    assert eval_mu(spec, x, x) == lam


@settings(max_examples=50)
@given(descriptors(), st.floats(0, 5), unit, unit, unit)
def test_mu_telescopes(c1, lam, a, b, c):
    x, y, z = sorted((a, b, c), reverse=True)
    spec = ProblemSpec(lambda0=lam, c1=c1)
    lhs = eval_mu(spec, x, y) + eval_mu(spec, y, z) - lam
    assert lhs == pytest.approx(eval_mu(spec, x, z), abs=1e-9 * (1 + abs(lhs)))


@given(descriptors(arity=2))
def test_descriptor_round_trip(desc):
    back = D.from_text(desc.to_text(), 2)
    assert back == desc
    pts = np.linspace(0, 1, 7)
    assert np.array_equal(back(pts, pts[::-1]), desc(pts, pts[::-1]))


def test_descriptor_text_forms():
    d = D.from_text("monomial:1.0:2, sine:0.5:3.0*cosine:1.0:2.0@y", 2)
    x, y = 0.3, 0.7
    assert d(x, y) == pytest.approx(x**2 + 0.5 * math.sin(3 * x) * math.cos(2 * y), abs=1e-15)
    assert D.from_text("", 1).is_zero
    with pytest.raises(ValueError):
        D.from_text("tangent:1:1")
    with pytest.raises(ValueError):
        D.from_text("monomial:1:-1")
    with pytest.raises(ValueError):
        D.from_text("sine:1:1@y", 1)


def test_basis_text_is_exact():
    b = Basis("exponential", 0.1 + 0.2, 1 / 3)
    assert Basis.from_text(b.to_text()) == b


def test_constants_trivial():
    c = compute_constants(ProblemSpec(lambda0=1.0))
    assert (c.f_bar, c.lambda_bar, c.M) == (0.0, 1.0, 0.5)
    assert c.bound == pytest.approx(0.5 * math.e, abs=1e-6)
    assert c.bound == pytest.approx(1.359141, abs=1e-6)


def test_constants_linear_c1():
    spec = ProblemSpec(lambda0=2.0, c1=D.of(("monomial", 1.0, 1.0)), f=D.constant(1.0, 2))
    c = compute_constants(spec)
    assert c.lambda_bar == 2.0
    assert c.M == 1.5
    assert c.f_bar == 1.0


def test_constants_negative_f():
    c = compute_constants(ProblemSpec(lambda0=1.0, f=D.constant(-1.0, 2)))
    assert c.f_bar == 1.0 and c.M == 1.0
    assert c.bound == pytest.approx(7.389056, abs=1e-6)


def test_constants_records_resolution():
    c = compute_constants(ProblemSpec(lambda0=1.0), sample_count=33)
    assert c.sample_count == 33
    assert c.M == (c.f_bar + c.lambda_bar) / 2
    assert c.lambda_bar >= 1.0 and c.bound >= c.M


@settings(max_examples=30, deadline=None)
@given(descriptors(arity=2), st.floats(1.0, 3.0))
def test_constants_monotone_in_f(f, scale):
    spec = ProblemSpec(lambda0=1.0, f=f)
    bigger = D(tuple((Basis(p[0].kind, p[0].amplitude * scale, p[0].parameter, p[0].axis),) + p[1:]
                     for p in f.products), 2)
    assert compute_constants(ProblemSpec(lambda0=1.0, f=bigger), 21).M >= compute_constants(spec, 21).M


def test_validate_trivial_passes():
    rep = validate_spec(ProblemSpec(lambda0=1.0), 1.0)
    assert rep.passed
    assert all(line.startswith(("PASS", "WARN")) for line in rep.lines())


def test_validate_witness_for_large_c2():
    rep = validate_spec(ProblemSpec(lambda0=1.0, c2=D.constant(2.0)), 1.0)
    assert not rep.passed
    (fail,) = [c for c in rep.failures() if c.name == "lambda0_exceeds_sup_c"]
    assert fail.witness["c"] == 2.0


def test_validate_lipschitz_profile():
    spec = ProblemSpec(lambda0=2.0, c3_L=D.of(("exponential", 1.0, -1.0)),
                       c3_shape=D.of(("monomial", 1.0, 1.0)), c3_gamma0=1.0)
    rep = validate_spec(spec, 2.0)
    assert {c.name: c.passed for c in rep.checks}["c3_modulus"]


def test_validate_modulus_violation():
    # sin(5x) has slope 5 > 1, so |shape(x)-shape(y)| <= |x-y| fails
    spec = ProblemSpec(lambda0=5.0, c3_L=D.constant(1.0), c3_shape=D.of(("sine", 1.0, 5.0)))
    rep = validate_spec(spec, 1.0)
    assert not {c.name: c.passed for c in rep.checks}["c3_modulus"]


def test_validate_negative_L():
    spec = ProblemSpec(lambda0=5.0, c3_L=D.constant(-1.0))
    assert not {c.name: c.passed for c in validate_spec(spec, 1.0).checks}["L_nonnegative"]


def test_validate_deterministic():
    spec = ProblemSpec(lambda0=1.3, c1=D.of(("sine", 0.4, 2.0)), c2=D.of(("cosine", 0.3, 1.0)))
    assert validate_spec(spec, 3.0, 41) == validate_spec(spec, 3.0, 41)


def test_problem_spec_rejections():
    with pytest.raises(ValueError):
        ProblemSpec(lambda0=-1.0)
    with pytest.raises(ValueError):
        ProblemSpec(lambda0=1.0, c3_gamma0=0.5)
    with pytest.raises(ValueError):
        ProblemSpec(lambda0=1.0, theta=0.7)
    with pytest.raises(ValueError):
        ProblemSpec(lambda0=1.0, f=D.zero(1))
