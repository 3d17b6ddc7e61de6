# %% [markdown]
# # Why fixed-grid spatial studies saturate
#
# A spatial refinement study at a fixed time grid measures
# ``e(h, tau) ~ C_t tau^(w+1) + C_x h^k`` with ``tau`` frozen.  With dG(0)
# and ``M = 64`` the temporal part is a floor of a few 1e-3, so the spatial
# order collapses once ``h^k`` falls below it.  Taylor-Hood also gives
# ``k = 3`` in L2 and ``k = 2`` in H1 for smooth solutions, one order more
# than the lowest-order bound.  Both effects are visible below.

# %%
import numpy as np

from stokes_dg_lab import StudyConfig, run_convergence_study

def orders(**kw):
    cfg = StudyConfig(problem="stokes_vortex_exp", norms=["l2l2", "l2h1"], **kw)
    rep = run_convergence_study(cfg)
    for r in rep.rows:
        print(f"  n={r['n']:3d} M={r['M']:3d}  l2l2 {r['l2l2']:.3e}  l2h1 {r['l2h1']:.3e}")
    print("  orders", {k: np.round(v, 2).tolist() for k, v in rep.orders.items()})
    return rep

# %% [markdown]
# dG(0), fixed ``M = 64``: the last L2 pair hits the temporal floor.

# %%
rep0 = orders(w=0, spatial_levels=[2, 4, 8, 16], temporal_levels=[64])

# %% [markdown]
# dG(1) with the same grid has a far smaller temporal error, so the spatial
# orders are the Taylor-Hood ones (about 3 and 2).

# %%
rep1 = orders(w=1, spatial_levels=[2, 4, 8, 16], temporal_levels=[64])

# %% [markdown]
# Refining time at fixed ``n = 32`` shows the converse for dG(1): the
# spatial error at ``n = 32`` is a floor near 1e-4 and the second-order
# temporal rate flattens on the last pair.

# %%
rep_t = orders(w=1, spatial_levels=[32], temporal_levels=[4, 8, 16, 32],
               coupling="refine_time_only")
