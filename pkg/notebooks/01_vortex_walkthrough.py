# %% [markdown]
# # Transient Stokes with dG time stepping
#
# A Taylor-Hood discretisation of the unit square, a manufactured vortex and
# one dG(0) and one dG(1) solve.  Errors are measured against the exact
# velocity in the space-time norms.

# %%
import numpy as np

from stokes_dg_lab import (
    discretize, build_domain, get_preset, uniform_partition,
    solve_stokes_dg, error_report, stability_functionals,
)

problem = get_preset("stokes_vortex_exp")
mesh = build_domain("unit_square", 8)
disc = discretize(mesh)
print(f"{mesh.n_triangles} triangles, {disc.n_u} velocity and {disc.n_p} pressure unknowns")

# %% [markdown]
# The discrete solution is piecewise constant (w=0) or piecewise linear
# (w=1) in time.  dG(0) is backward Euler with an L2-projected initial value.

# %%
part = uniform_partition(1.0, 16)
for w in (0, 1):
    sol = solve_stokes_dg(problem, disc, part, w)
    rep = error_report(problem, sol)
    print(f"w={w}: l2l2 {rep.l2l2:.3e}  l2h1 {rep.l2h1:.3e}  sampled linf-l2 {rep.linfl2_sampled:.3e}")

# %% [markdown]
# Every velocity coefficient is discretely divergence free, and the node
# summary shows the energy decay together with the jumps at time nodes.

# %%
print(all(disc.in_Vh(c) for c in sol.velocity.coef.reshape(-1, disc.n_u)))
for row in sol.node_summary()[:4]:
    print(row)

# %% [markdown]
# Stability functionals: left and right hand sides of the two a priori
# bounds (L2 and gradient variants).

# %%
st = stability_functionals(sol, problem)
print(f"L2 variant   lhs {st.lhs_l2:.4f}  rhs {st.rhs_l2:.4f}")
print(f"grad variant lhs {st.lhs_grad:.4f}  rhs {st.rhs_grad:.4f}")
