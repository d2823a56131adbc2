"""
How fast do jumps decay?
========================

Measured adjacent-node jumps of the mixed 1D DPP against the bound
2 ||g|| alpha^ceil(dist / eps), for several alpha.
"""

# %%
import numpy as np

from dppreg.jumps import calibrate_allowance, solve_family_member, verify_jump_bound
from dppreg.solver import step_data

eps = 0.2
allowance = calibrate_allowance(eps, 64)
print(f"allowance from the continuous alpha=0 solve: {allowance:.4e}")

# %%
for alpha in (0.25, 0.5, 0.75, 0.9):
    spec, rep = solve_family_member(alpha, eps, 64)
    prof = verify_jump_bound(rep.solution, step_data, spec.params, allowance)
    k = np.ceil(prof.dist_to_boundary / eps - 1e-9)
    worst = [prof.jump_proxy[k == j].max() for j in range(1, 4)]
    print(f"alpha={alpha:<4} violations={prof.violations}  max jump by layer: " + ", ".join(f"{w:.3e}" for w in worst))
