# %% [markdown]
# # Interaction kernels and the self force
#
# A gaussian kernel `g(s) = beta / sqrt(2 pi alpha^2) exp(-s / (2 alpha^2))`
# with `s` half the squared distance.  This looks at the admissibility
# classification, the covered-circle force and the force along an ellipse.

# %%
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from arrestflow import app, forcing, geometry, kernels

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
os.makedirs(OUT, exist_ok=True)

# %% [markdown]
# ## Classification

# %%
for alpha, beta in ((0.05, 1.0), (1.0, 1.0)):
    rep = app.validate_kernel(kernels.gaussian_kernel(alpha, beta))
    print(f"alpha={alpha}: flags {rep['flags']}, c0*={rep['c0star']:.6g}, c1*={rep['c1star']:.6g}, "
          f"self routes {rep['routes']['self']}")

# %% [markdown]
# ## Covered circle
#
# With `g(s) = exp(-s)` the self force on an `m`-times covered circle is
# uniform and has a closed form in the modified Bessel function `I0`.

# %%
unit_exp = kernels.gaussian_kernel(1 / math.sqrt(2), math.sqrt(math.pi))
for m, sigma in ((1, 1.0), (2, 1.0), (1, 2.0), (3, 2.0)):
    c = geometry.covered_circle(m, sigma, M=256)
    raw = forcing.raw_force([c.points], [c.sigma], [[unit_exp]], 0) / (2 * math.pi)
    exact = forcing.circle_force_oracle(m, sigma)
    print(f"m={m} sigma={sigma}: quadrature {raw.mean():.15f}  closed form {exact:.15f}")

# %% [markdown]
# ## Force along an ellipse
#
# Narrow kernels see only the local neighbourhood, so the force is nearly the
# flat-front value `sqrt(2) beta` everywhere.  Wide kernels feel the far side.

# %%
e = geometry.ellipse(2, 1, M=256)
x = np.linspace(-math.pi, math.pi, 256, endpoint=False)
fig, ax = plt.subplots(figsize=(6, 4))
for alpha in (0.05, 0.2, 1.0):
    k = kernels.gaussian_kernel(alpha, 1.0)
    raw = forcing.raw_force([e.points], [e.sigma], [[k]], 0)
    ax.plot(x, raw, label=f"alpha={alpha}")
ax.axhline(math.sqrt(2), color="k", lw=0.5)
ax.set_xlabel("x")
ax.set_ylabel("raw self force")
ax.legend()
fig.savefig(os.path.join(OUT, "ellipse_force.png"), dpi=120)
