"""Lift the constant solution R^H order by order and compare with model G."""
import numpy as np

from ybx.catalog import default_catalog
from ybx.lift import LiftJob, lift, match_family

ledger = lift(LiftJob("const.RH", order=4))
print("seed R(0):")
print(np.vectorize(str)(ledger.r0))
for k, leaf in enumerate(ledger.leaves()):
    print(f"leaf {k}: status {leaf.status}, match {leaf.match}, dims {leaf.dims(4)}")
    for n in (1, 2):
        print(f"  order {n} coefficient:")
        print(leaf.coefficient(n))
    rep = match_family(ledger, leaf, default_catalog().get("spec.RG"))
    print("  per-order fit residuals against spec.RG:", [f"{r:.1e}" for r in rep.per_order])

# the R^A branch splits on a quadratic constraint
ra = lift(LiftJob("const.RA", "p=1,q=1,s=-1", order=2))
for leaf in ra.leaves():
    print("R^A leaf:", leaf.status, leaf.match, leaf.dims(2), list(leaf.constraints))
