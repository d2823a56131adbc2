"""
Calibrating the discrete extremal operator
==========================================

On u = |x|^2 the extremal operator equals alpha Lambda^2 + beta n/(n+2)
up to quadrature error. Here we watch that error shrink as the lattice
refines, in one and two dimensions.
"""

# %%
import numpy as np

from dppreg import Disk, EllipticityParams, Interval, ScalarField, build_region
from dppreg.operators import apply_operator, pucci_max, pucci_min

eps = 0.1

# %%
for dim, dom in [(1, Interval(-1, 1)), (2, Disk((0, 0), 0.6))]:
    p = EllipticityParams(0.5, 0.5, 1.0, eps)
    exact = p.alpha * p.lam**2 + p.beta * dim / (dim + 2)
    for m in (2, 4, 8, 16):
        reg = build_region(dim, dom, eps / m, p)
        u = ScalarField.from_function(reg, lambda x: (x**2).sum(1))
        val = apply_operator(pucci_max(p, dim), u, np.zeros(dim))
        print(f"n={dim} h=eps/{m:<2d}  L+ = {val:.5f}  exact {exact:.5f}  rel err {abs(val - exact) / exact:.2%}")

# %% [markdown]
# For the concave -|x|^2 the supremum sits at nu = 0, so only the average
# term survives. The minimum operator on |x|^2 is its mirror image.

# %%
p = EllipticityParams(0.5, 0.5, 1.0, eps)
reg = build_region(2, Disk((0, 0), 0.6), eps / 8, p)
u = ScalarField.from_function(reg, lambda x: (x**2).sum(1))
print("L+(-|x|^2) =", apply_operator(pucci_max(p, 2), -u, [0.0, 0.0]))
print("L-(|x|^2)  =", apply_operator(pucci_min(p, 2), u, [0.0, 0.0]))
