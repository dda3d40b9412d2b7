# %% [markdown]
# Ground states u_{p_n} for p_n -> 2 approach the ground state at p = 2.
# Profiles converge fast. The energy gap and the Nehari ratio of u_2 move
# at first order in |p_n - 2|, with slopes fixed by the limit profile.

# %%
import numpy as np

from plaplab.convergence import run_convergence, target_ground_state
from plaplab.variational import radial_integral

rep = run_convergence(2.0, 30.0, 1, 7, "both")
print(rep.table())
print(f"one-sided limits differ by {rep.limit_gap:.2e} after extrapolation")

# %% envelope-theorem slopes dI/dp and dh/dp at p = 2
gs = target_ground_state(2.0, 30.0)


def xlogx_pow(x, p):
    x = np.abs(x)
    return np.where(x > 0, x**p * np.log(np.where(x > 0, x, 1.0)), 0.0)


dI = radial_integral(gs.profile, lambda u, du: (xlogx_pow(du, 2) + xlogx_pow(u, 2)) / 2
                     - (np.abs(du) ** 2 + u**2) / 4)
dh = radial_integral(gs.profile, lambda u, du: xlogx_pow(du, 2) + xlogx_pow(u, 2)) \
    / radial_integral(gs.profile, lambda u, du: u**30)
print(f"dI/dp = {dI:.5f}, dh/dp = {dh:.5f}")
for s in rep.steps:
    off = abs(s.p_n - 2.0)
    print(f"k = {s.k} {s.side:>5}: |dI|/off = {s.energy_gap / off:.5f}  "
          f"|h - 1|/off = {s.h_gap / off:.5f}")
