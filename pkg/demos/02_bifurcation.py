# %% [markdown]
# Continuation in p at fixed q. A nonconstant branch is born at a fold and
# persists up to p = 2; at q = 60 a second, non-monotone branch appears.

# %%
import tempfile
from pathlib import Path

from plaplab.continuation import bifurcate
from plaplab.spectral import radial_neumann_eigenvalue

lam = [radial_neumann_eigenvalue(1, k).lam for k in (2, 3, 4)]
print("thresholds 2 + lambda_k:", [round(2 + x, 4) for x in lam])

# %%
for q in (30.0, 60.0):
    d = bifurcate(q, 1)
    print(f"q = {q:g}")
    for br in d.branches:
        kind = "cone" if br.in_cone else "non-monotone"
        print(f"  branch {br.id} ({kind}): fold at p = {br.fold_p:.4f}, {len(br.points)} points")

# %% the diagram is written as CSV plus a gnuplot script
out = Path(tempfile.mkdtemp(prefix="diagram-"))
d.write(out)
print(sorted(x.name for x in out.iterdir()))
print((out / "diagram.gp").read_text())
