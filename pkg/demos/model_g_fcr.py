"""Non-regular model G: Lax operator, its two-dimensional FCR space, and the
slices of that space which solve the Yang-Baxter equation."""
import numpy as np

from ybx.catalog import Bindings, default_catalog
from ybx.rll import lax_from_solution, rhat, solve_fcr_space
from ybx.verify import braiding_check, record_evaluable, regularity_check, ybe_residual

cat = default_catalog()
G = record_evaluable(cat.get("spec.RG"))
u, v, w = 0.7 + 0.2j, -0.3 + 0.5j, 0.4 - 0.9j

print("braiding deviation of R^G:", round(braiding_check(G, u, v)[1], 3))
print("regularity deviation of R^G:", round(regularity_check(G, u)[1], 3))

L = lax_from_solution(cat.get("spec.RG"))
space = solve_fcr_space(L, u, v)
print(f"FCR space at (u,v): dim {space.dim}, singular-value gap {space.info.gap:.1e}")
for name, res in space.matches:
    print(f"  {name:<22} residual {res:.1e}")
print("rhat(R^G) in space:", space.contains(rhat(G)(u, v)))


def member(f, g):
    return record_evaluable(cat.get("tilde.RG"), fns=Bindings({"f1": f, "g1": g}))


print("\nYBE residual of members R~(f, g):")
for f, g in [("1+u", "2-v"), ("exp(u-v)", "exp(u-v)"), ("1+u*v", "0"), ("0", "3+u")]:
    X = member(f, g)
    print(f"  f={f:<9} g={g:<9} ybe {ybe_residual(X, u, v, w):.1e}  "
          f"regularity {regularity_check(X, u)[1]:.1e}")
