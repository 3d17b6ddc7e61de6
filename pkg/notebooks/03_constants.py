# %% [markdown]
# # Mesh-independent constants
#
# The discrete inf-sup constant, the smallest eigenvalue of the discrete
# Stokes operator and the H1 stability of the discrete Leray projection
# should not drift with ``h``.

# %%
import numpy as np

from stokes_dg_lab import StudyConfig, build_domain, discretize, run_probe
from stokes_dg_lab.operators import stokes_eigenvalue

# %%
cfg = StudyConfig(spatial_levels=[2, 4, 8, 16], temporal_levels=[1])
rep = run_probe("infsup", cfg)
print([round(r["beta_h"], 5) for r in rep.rows], rep.checks["infsup"]["relative_spread"])

# %% [markdown]
# The continuous first Stokes eigenvalue on the unit square is about 52.34;
# the conforming discrete one approaches it from above and always exceeds
# the Laplace bound ``2 pi^2``.

# %%
for n in (4, 8, 16):
    lam, _, info = stokes_eigenvalue(discretize(build_domain("unit_square", n)))
    print(n, round(lam, 4), info.iterations)
print("2 pi^2 =", 2 * np.pi**2)

# %%
rep = run_probe("leray_h1", StudyConfig(spatial_levels=[4, 8, 16], temporal_levels=[1]))
print([round(r["ratio"], 4) for r in rep.rows], rep.passed)

# %% [markdown]
# Stability ratio over a 3x3 grid of mesh and step sizes.

# %%
cfg = StudyConfig(spatial_levels=[2, 4, 8], temporal_levels=[4, 16, 64], coupling="grid")
rep = run_probe("stability", cfg)
for r in rep.rows:
    print(r["n"], r["M"], round(r["ratio"], 4), round(r["ratio_grad"], 4))
