import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ybx.catalog import Bindings, default_catalog
from ybx.scalars import GaussRat
from ybx.tensor import perm
from ybx.verify import (RELATIONS, ResidualReport, SamplePlan, SamplingError, braiding_check,
                        constant_evaluable, constant_ybe_residual, fcr_residual, formal_ybe_identity,
                        hexagon_operator, modified_ybe_factor, record_evaluable, regularity_check,
                        run_relation, scaled, similarity_transform, unitarized, verify_functional,
                        ybe_residual)

CAT = default_catalog()
SPECTRAL = [r.id for r in CAT.list(kind="spectral")]
CONSTANT = [r.id for r in CAT.list(kind="constant")]
P = constant_evaluable(perm())
I4 = constant_evaluable(np.eye(4, dtype=complex))
TRIPLES = [(0.7 + 0.2j, -0.3 + 0.9j, 1.1 - 0.4j), (-0.6 - 0.5j, 0.2 + 0.1j, 0.9 + 0.8j)]


def tilde_g(f, g):
    return record_evaluable(CAT.get("tilde.RG"), fns=Bindings({"f1": f, "g1": g}))


def random_instance(rid, seed):
    rec = CAT.get(rid)
    plan = SamplePlan(seed=seed)
    s = plan.draw(0, 0, rec)
    return record_evaluable(rec, s.params, s.bindings, source_bindings=s.source_bindings)


def random_matrix(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return m


# ---------------------------------------------------------------- ybe

def test_ybe_examples():
    assert run_relation("ybe", CAT.get("spec.RE"), SamplePlan(count=50)).max <= 1e-10
    assert ybe_residual(I4, *TRIPLES[0]) == 0.0
    assert all(ybe_residual(tilde_g("1", "2"), *t) > 0.01 for t in TRIPLES)


@pytest.mark.parametrize("rid", SPECTRAL)
def test_spectral_ybe_against_einsum_oracle(rid):
    R = random_instance(rid, 11)
    for t in TRIPLES:
        assert oracles.ybe_gap(R, *t) <= 1e-9
        assert ybe_residual(R, *t) == pytest.approx(oracles.ybe_gap(R, *t), abs=1e-12)


def test_ybe_residual_detects_random_matrix():
    R = constant_evaluable(random_matrix(0))
    assert ybe_residual(R, 0, 0, 0) > 0.01
    assert oracles.ybe_gap(R, 0, 0, 0) > 0.01


@pytest.mark.parametrize("rid", CONSTANT)
def test_constant_ybe_exact(rid):
    rep = run_relation("constant-ybe", CAT.get(rid), SamplePlan(seed=3, count=5, backend="exact"))
    assert rep.residuals == [0.0] * 5


def test_constant_ybe_examples():
    assert constant_ybe_residual(perm()) == 0.0
    assert constant_ybe_residual(random_matrix(1)) > 0.01


@pytest.mark.parametrize("rid", ["spec.RD", "spec.RDp", "spec.RF", "spec.RG", "spec.RI", "spec.RJ"])
def test_formal_identity_for_difference_form(rid):
    assert formal_ybe_identity(CAT.get(rid))
    rep = run_relation("ybe", CAT.get(rid), SamplePlan(backend="formal"))
    assert rep.passed and rep.backend == "formal"


def test_formal_identity_can_fail():
    # transpose of R^F is not a solution in the chosen ordering only if the entries are asymmetric;
    # a hand-made non-solution must be rejected
    from dataclasses import replace
    rec = CAT.get("spec.RG")
    rows = [list(r) for r in rec.matrix]
    rows[0][0] = "2"
    bad = replace(rec, id="spec.bad", matrix=tuple(tuple(r) for r in rows))
    assert not formal_ybe_identity(bad)


# ---------------------------------------------------------------- braiding / regularity

def test_braiding_examples():
    c, dev = braiding_check(P, 0.3, 0.1)
    assert c == 1 and dev == 0
    _, dev = braiding_check(record_evaluable(CAT.get("spec.RG")), 0.4 + 0.1j, -0.7j)
    assert dev > 0.1
    _, dev = braiding_check(tilde_g("exp(u-v)", "exp(u-v)"), 0.4 + 0.1j, -0.7j)
    assert dev <= 1e-9


def test_regularity_examples():
    assert regularity_check(tilde_g("1+u*v", "1+u*v"), 0.3 + 0.4j)[1] <= 1e-9
    assert regularity_check(record_evaluable(CAT.get("spec.RG")), 0.3)[1] > 0.1
    assert regularity_check(P, 0.0) == (1, 0.0)


@pytest.mark.parametrize("rid", ["spec.RG", "spec.RD", "spec.RF", "spec.RBxy"])
def test_braiding_scalar_symmetric(rid):
    R = random_instance(rid, 5)
    for u, v, _ in TRIPLES:
        c1, d1 = braiding_check(R, u, v)
        c2, d2 = braiding_check(R, v, u)
        if d1 <= 1e-9:
            assert d2 <= 1e-9
            assert abs(c1 - c2) <= 1e-9 * max(1, abs(c1))


# ---------------------------------------------------------------- fcr / hexagon / modified

@pytest.mark.parametrize("rid", SPECTRAL)
def test_specialization_to_fcr(rid):
    R = random_instance(rid, 8)
    zero = 0j
    for u, v, _ in TRIPLES:
        assert fcr_residual(R(u, v), lambda x: R(x, zero), u, v) <= 1e-9


def test_fcr_examples():
    G = record_evaluable(CAT.get("spec.RG"))
    L = lambda x: G(x, 0j)
    u, v = 0.4 + 0.2j, -0.5 + 0.3j
    assert fcr_residual(tilde_g("2+u", "1-3*v")(u, v), L, u, v) <= 1e-10
    assert fcr_residual(random_matrix(2), L, u, v) > 0.01


def test_hexagon_examples():
    np.testing.assert_array_equal(hexagon_operator(P, 0.1, 0.2, 0.3), np.eye(8))
    Rn = unitarized(tilde_g("1", "1"))
    for t in TRIPLES:
        assert np.linalg.norm(hexagon_operator(Rn, *t) - np.eye(8)) <= 1e-9
    A = hexagon_operator(tilde_g("1", "2"), *TRIPLES[0])
    from ybx.tensor import fit_scalar
    assert fit_scalar(A, np.eye(8))[1] > 1e-3


def test_modified_ybe_examples():
    m = modified_ybe_factor(record_evaluable(CAT.get("spec.RG")), *TRIPLES[0])
    assert m.form == "multiplicative" and abs(m.scalar - 1) <= 1e-9
    m = modified_ybe_factor(tilde_g("1+u", "1+u"), *TRIPLES[1])
    assert m.scalar is not None and abs(m.scalar - 1) <= 1e-9
    for t in TRIPLES:
        m = modified_ybe_factor(tilde_g("1", "2"), *t)
        assert m.scalar is None and m.deviation > 1e-3


def test_modified_ybe_additive_fallback():
    # rank-1 R makes the right-hand side singular
    m = modified_ybe_factor(random_instance("spec.RO", 1), *TRIPLES[0])
    assert m.form == "additive" and m.deviation <= 1e-9


# ---------------------------------------------------------------- invariance properties

nonzero = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)


@given(st.sampled_from(SPECTRAL), nonzero)
@settings(max_examples=40, deadline=None)
def test_ybe_scaling_invariance(rid, c):
    R = random_instance(rid, 2)
    t = TRIPLES[0]
    assert ybe_residual(scaled(R, c), *t) <= 1e-9
    bad = tilde_g("1", "2")
    assert (ybe_residual(bad, *t) > 1e-3) == (ybe_residual(scaled(bad, c), *t) > 1e-3)


invertible_q = st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False), min_size=4, max_size=4).map(
    lambda xs: np.array(xs).reshape(2, 2)).filter(lambda q: abs(np.linalg.det(q)) > 0.2)


@given(st.sampled_from(SPECTRAL), invertible_q)
@settings(max_examples=40, deadline=None)
def test_ybe_similarity_invariance(rid, q):
    R = random_instance(rid, 4)
    assert ybe_residual(similarity_transform(R, q), *TRIPLES[1]) <= 1e-8


def test_similarity_examples():
    G = record_evaluable(CAT.get("spec.RG"))
    T = similarity_transform(G, np.eye(2))
    np.testing.assert_allclose(T(0.2, 0.5), G(0.2, 0.5))
    plan = SamplePlan(count=20)
    res, _ = plan.run(lambda s: ybe_residual(similarity_transform(G, [[1, 2], [0.5, 3]]), *s.points))
    assert max(r for _, r in res) <= 1e-9
    with pytest.raises(ValueError):
        similarity_transform(G, [[1, 2], [2, 4]])


def test_exact_similarity():
    m = CAT.get("const.RH")
    R = record_evaluable(m, backend="exact")
    q = np.array([[GaussRat(1), GaussRat(2)], [GaussRat(0), GaussRat(1)]], dtype=object)
    assert constant_ybe_residual(similarity_transform(R, q)(None, None)) == 0.0


# ---------------------------------------------------------------- sampling and reports

def test_counter_mode_sampling_is_order_free():
    plan = SamplePlan(seed=9)
    rec = CAT.get("spec.RC")
    a = plan.draw(3, 0, rec)
    plan.draw(0, 0, rec)
    b = plan.draw(3, 0, rec)
    assert a.points == b.points and a.bindings.text() == b.bindings.text()
    assert plan.draw(4, 0, rec).points != a.points


def test_exact_points_on_annulus_grid():
    plan = SamplePlan(seed=1, backend="exact")
    for i in range(10):
        for z in plan.draw(i, 0).points:
            assert isinstance(z, GaussRat)
            assert 0.25 <= abs(complex(z)) ** 2 <= 2.25
            assert (z.re * 10).denominator == 1


def test_rejection_budget():
    def always_pole(s):
        raise ZeroDivisionError
    with pytest.raises(SamplingError):
        SamplePlan(max_rejections=5).run(always_pole)


def test_report_json_is_deterministic():
    a = run_relation("braiding", CAT.get("spec.RG"), SamplePlan(seed=2, count=4))
    b = run_relation("braiding", CAT.get("spec.RG"), SamplePlan(seed=2, count=4))
    assert a.dumps() == b.dumps()
    d = json.loads(a.dumps())
    assert d["verdict"] == "fail" and d["samples"] == 4 and d["checksum"]
    assert set(d) >= {"relation", "samples", "max", "verdict", "seed"}


def test_unknown_relation_and_backend_limits():
    with pytest.raises(ValueError):
        run_relation("nope", CAT.get("spec.RG"), SamplePlan())
    with pytest.raises(ValueError):
        run_relation("braiding", CAT.get("spec.RG"), SamplePlan(backend="formal"))
    with pytest.raises(ValueError):
        run_relation("constant-ybe", CAT.get("spec.RG"), SamplePlan())
    assert set(RELATIONS) == {"ybe", "constant-ybe", "braiding", "regularity", "fcr", "modified-ybe"}


def test_functional_cocycle():
    good = verify_functional(lambda u, v: np.exp(2 * (u - v)))
    assert good.passed
    bad = verify_functional(lambda u, v: 1 + u - v)
    assert not bad.passed
