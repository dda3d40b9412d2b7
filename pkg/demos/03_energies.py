# %% [markdown]
# Energies and the Nehari constraint. Every solution lies on the Nehari set
# (h = 1); the ground state has lower energy than the constant u = 1.

# %%
import numpy as np

from plaplab.problem import ProblemParams
from plaplab.radial_ode import RadialProfile, uniform_grid
from plaplab.shooter import solve_all
from plaplab.variational import classify, constant_energy, energy, nehari_project

for p, q in ((1.95, 30.0), (1.5, 60.0), (3.0, 5.0)):
    params = ProblemParams(p, q, 1)
    print(f"p = {p}, q = {q}: I(1) = {constant_energy(params):.8f}")
    for s in classify(solve_all(params)):
        rep = energy(s.profile)
        print(f"  {s.kind.value:<14} u0 = {s.u0:.8f}  I = {s.energy:.8f}  "
              f"Nehari residual = {rep.nehari_residual:.1e}")

# %% for a constant profile c the Nehari scalar is c^(p - q)
r = uniform_grid()
params = ProblemParams(2.0, 30.0, 1)
for c in (0.5, 1.0, 1.5):
    prof = RadialProfile(r, np.full_like(r, c), np.zeros_like(r), params)
    print(c, nehari_project(prof), c ** (2.0 - 30.0))
