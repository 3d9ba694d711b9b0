import json
from fractions import Fraction

import numpy as np
import pytest

from ybx.catalog import default_catalog
from ybx.lift import (LiftError, LiftJob, branch_on_nonlinear, expand_seed, lift, match_family,
                      order_system, parse_branch, solve_order)
from ybx.linalg import rref
from ybx.poly import MultiPoly
from ybx.verify import SamplePlan, run_relation

CAT = default_catalog()
RA_BRANCH = "p=1,q=1,s=-1"


@pytest.fixture(scope="module")
def rh_ledger():
    return lift(LiftJob("const.RH", order=4))


@pytest.fixture(scope="module")
def ra_ledger():
    return lift(LiftJob("const.RA", RA_BRANCH, order=2))


@pytest.fixture(scope="module")
def id_ledger():
    return lift(LiftJob("const.I", order=1))


def test_rh_single_branch_dimension_one(rh_ledger):
    (leaf,) = rh_ledger.leaves()
    assert leaf.dims(4) == [1, 1, 1, 1]
    assert leaf.status == "matched" and leaf.match == "spec.RG"


def test_rh_second_order_is_half_square_of_first(rh_ledger):
    (leaf,) = rh_ledger.leaves()
    c1, c2 = leaf.coefficient(1), leaf.coefficient(2)
    (sym,) = {v for p in c1.flat for v in p.variables()}
    r0 = rh_ledger.r0
    for i, j in np.ndindex(4, 4):
        if c1[i, j]:
            # C1 = phi * A, C2 = phi^2/2 * A with A the off-diagonal pattern of the seed
            a = r0[i, j]
            phi = c1[i, j] * (1 / a)
            assert c2[i, j] == phi * phi * Fraction(1, 2) * a
        else:
            assert not c2[i, j]
    assert sym == "f1_1"


def test_rh_match_report(rh_ledger):
    (leaf,) = rh_ledger.leaves()
    rep = match_family(rh_ledger, leaf, CAT.get("spec.RG"))
    assert rep.contained and rep.transform == "id"
    assert len(rep.per_order) == 5      # orders 0..4
    bad = match_family(rh_ledger, leaf, CAT.get("spec.RF"))
    assert not bad.contained


def test_ra_three_children(ra_ledger):
    assert ra_ledger.root.status == "split"
    leaves = ra_ledger.leaves()
    assert len(leaves) == 3
    matched = [l for l in leaves if l.status == "matched"]
    assert len(matched) == 2 and all(l.match.startswith("spec.RE") for l in matched)
    assert any("transpos" in n for l in leaves for n in l.notes)


def test_identity_diagonal_space(id_ledger):
    leaves = id_ledger.leaves()
    diag = [l for l in leaves if l.dims(1) == [3]]
    assert len(diag) == 1
    c1 = diag[0].coefficient(1)
    off = [c1[i, j] for i, j in np.ndindex(4, 4) if i != j]
    assert all(not p for p in off)
    assert "coordinate" in " ".join(id_ledger.root.notes)


@pytest.mark.parametrize("seed,branch", [("const.RH", None), ("const.RA", RA_BRANCH), ("const.I", None),
                                         ("const.RN", "p=1,q=2,k=3,s=1"), ("const.RC", "p=2,q=3,k=1")])
def test_gauge_presence_and_block_redundancy(seed, branch):
    exp = expand_seed(LiftJob(seed, branch))
    system = order_system(exp.r0, [], 1)
    sol = solve_order(system, exp.r0, exp.gauge_index)
    assert sol.gauge_present
    b1, b2, b3 = (system.block_matrix(b) for b in range(3))
    assert all(x + y == z for r1, r2, r3 in zip(b1, b2, b3) for x, y, z in zip(r1, r2, r3))
    rank = lambda m: len(rref(m)[2])
    assert rank(b1 + b2) == rank(b1 + b2 + b3)


def test_truncation_stability():
    for order in (2, 3):
        a = lift(LiftJob("const.RH", order=order), match=False).leaves()
        b = lift(LiftJob("const.RH", order=order + 1), match=False).leaves()
        assert [l.dims(order) for l in a] == [l.dims(order) for l in b]
    a = lift(LiftJob("const.RA", RA_BRANCH, order=1), match=False).leaves()
    b = lift(LiftJob("const.RA", RA_BRANCH, order=2), match=False).leaves()
    assert [l.dims(1) for l in a] == [l.dims(1) for l in b]


def test_matched_families_pass_ybe(rh_ledger, ra_ledger):
    for led in (rh_ledger, ra_ledger):
        for leaf in led.leaves():
            if leaf.match:
                rid = leaf.match.split()[0]
                assert run_relation("ybe", CAT.get(rid), SamplePlan(count=50)).passed


def test_branch_parsing_errors():
    rec = CAT.get("const.RA")
    with pytest.raises(LiftError):
        parse_branch("p=1", rec)
    with pytest.raises(LiftError):
        parse_branch("p=1,q=1,z=2", rec)
    with pytest.raises(LiftError):
        parse_branch("p=1,q=1,s=)", rec)
    assert parse_branch("p=1/2,q=1,s=-1", rec)["p"] == Fraction(1, 2)
    with pytest.raises(LiftError):
        lift(LiftJob("spec.RG"))
    with pytest.raises(LiftError):
        lift(LiftJob("const.RH", order=0))


def test_quadratic_split():
    x, y = MultiPoly.var("x"), MultiPoly.var("y")
    res = branch_on_nonlinear([x * y])
    assert len(res) == 2
    assert {tuple(sorted(r.subs)) for r in res} == {("x",), ("y",)}
    lin = branch_on_nonlinear([x - 2])
    assert len(lin) == 1 and lin[0].subs["x"] == MultiPoly.const(2)


def test_ledger_json_round_trip(ra_ledger):
    text = ra_ledger.dumps()
    data = json.loads(text)
    assert data["seed"] == "const.RA" and data["order"] == 2
    assert text == lift(LiftJob("const.RA", RA_BRANCH, order=2)).dumps()
