# %% [markdown]
# # Curve shortening on a circle and an ellipse
#
# With no growth and no interaction, each interface moves by curvature alone.
# A unit circle stays round and its length scale follows `sqrt(1 - 2t)`.
# A 2:1 ellipse rounds out as it shrinks, which shows up as a falling
# distortion.

# %%
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from arrestflow import config, diagnostics as diag, geometry, scenarios, solver

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
os.makedirs(OUT, exist_ok=True)

# %% [markdown]
# ## Circle against the exact radius

# %%
curves, system = config.build(config.config_from_dict(scenarios.scenario("circle-csf")))
samples = np.arange(1, 9) * 0.05
rows = []


def record(state, ev):
    rows.append((state.t, state.interfaces[0].length / (2 * math.pi)))


solver.run(solver.initial_state(curves), system, 1e-3, 0.4, sample_times=samples, observer=record)
for t, sigma in rows:
    print(f"t={t:.2f}  sigma={sigma:.12f}  error={abs(sigma - math.sqrt(1 - 2 * t)):.1e}")

# %% [markdown]
# ## Ellipse rounding
#
# The pseudo-distortion falls at every sample.  The Gromov distortion tends
# to `pi/2`, the circle value, only close to extinction.

# %%
curves, system = config.build(config.config_from_dict(scenarios.scenario("ellipse-csf", t_end=1.0)))
track, shapes = [], []


def observe(state, ev):
    c = geometry.Curve(ev.curves[0])
    sigma = state.interfaces[0].length / (2 * math.pi)
    track.append((state.t, sigma, diag.pseudo_distortion(c), geometry.gromov_distortion(c)))
    if len(track) % 20 == 1:
        shapes.append(c.points)
    return sigma < 0.3


solver.run(solver.initial_state(curves), system, 1e-3, 0.999,
           sample_times=np.arange(1, 100) * 0.01, observer=observe)
track = np.array(track)
print(f"stopped at t={track[-1, 0]:.2f}, sigma={track[-1, 1]:.3f}, "
      f"delta_inf - pi/2 = {track[-1, 3] - math.pi / 2:.4f}")

# %%
fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
for p in shapes:
    closed = np.vstack((p, p[:1]))
    ax0.plot(closed[:, 0], closed[:, 1], lw=1)
ax0.set_aspect("equal")
ax0.set_title("ellipse every 0.2")
ax1.plot(track[:, 0], track[:, 2], label="pseudo-distortion")
ax1.plot(track[:, 0], track[:, 3], label="Gromov distortion")
ax1.axhline(math.pi / 2, color="k", lw=0.5)
ax1.set_xlabel("t")
ax1.legend()
fig.savefig(os.path.join(OUT, "curve_shortening.png"), dpi=120)
