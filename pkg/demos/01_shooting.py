# %% [markdown]
# Shooting from the centre: each start value u(0) = d gives a trajectory,
# and Neumann solutions are the zeros of the terminal flux M(d) = w(1).

# %%
import numpy as np

from plaplab.problem import ProblemParams
from plaplab.shooter import scan_values, survey
from plaplab.timemap import oracle_solve, time_map

params = ProblemParams(p=2.0, q=30.0, N=1)
print(params.derived)

# %% sign changes of the miss function on (0, 1)
ds = np.linspace(0.05, 0.995, 20)
for d, m in zip(ds, scan_values(params, ds)):
    print(f"d = {d:.4f}   w(1) = {m:+.3e}")

# %% refine every bracket and split cone from non-monotone solutions
sv = survey(params)
for s in sv.cone:
    print(f"cone      u0 = {s.u0:.12f}   |w(1)| = {s.miss_residual:.1e}")
for s in sv.non_cone:
    print(f"non-cone  u0 = {s.u0:.12f}")

# %% in one dimension the conserved Hamiltonian gives an independent answer:
# a half-orbit from u = a must take exactly unit length, T(a) = 1
roots = oracle_solve(2.0, 30.0)
for a in roots:
    print(f"a = {a:.12f}   T(a) - 1 = {time_map(a, 2.0, 30.0) - 1:+.1e}")
nonconst = sorted(s.u0 for s in sv.cone if not s.is_constant)
print("max |u0 - a| =", max(abs(u - a) for u, a in zip(nonconst, roots)))
