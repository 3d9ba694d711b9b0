"""Periodic chain from a regular Lax operator: commuting transfer matrices,
conserved charges, and the nearest-neighbour Hamiltonian."""
import numpy as np

from ybx.catalog import Bindings, default_catalog
from ybx.rll import chain_operator, charges, hamiltonian_density, lax_from_solution, transfer_matrix
from ybx.tensor import commutator_norm

cat = default_catalog()
L = lax_from_solution(cat.get("tilde.RG"), Bindings({"f1": "exp(u-v)", "g1": "exp(u-v)"}))
print("regular Lax operator:", L.regular)

N = 4
t1, t2 = transfer_matrix(L, N, 0.3 + 0.1j), transfer_matrix(L, N, -0.8 + 0.4j)
print(f"[t(u), t(v)] relative norm: {commutator_norm(t1, t2):.1e}")

cs = charges(L, N, 4)
for (m, n), c in sorted(cs.q_table.items()):
    print(f"[Q{m}, Q{n}] = {c:.1e}")

h = hamiltonian_density(L)
np.set_printoptions(precision=3, suppress=True)
print("two-site density:")
print(h.real)
print("Q2 - sum h_i,i+1:", np.linalg.norm(cs.q[2] - chain_operator(h, N)))

# a non-regular Lax operator: log t(u) is not available, only t-coefficients
Lg = lax_from_solution(cat.get("spec.RO"), seed=1)
print("rank-1 model:", charges(Lg, 3, 2).flag)
