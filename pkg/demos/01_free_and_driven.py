"""
Free decay and a constant drive
===============================

The qutrit starts in a state with coherence between |0> and |1>. Left alone,
dephasing shrinks that coherence exponentially. A constant drive instead
sloshes population between the two levels and the coherence oscillates.
"""

import numpy as np

from coherence_control import ControlGrid, coherence, integrate_forward, paper_defaults

cfg = paper_defaults()
model = cfg.model()
rho0 = np.asarray(cfg.rho0)
pairs = [(0, 1)]

print(f"C(rho0) = {coherence(rho0, pairs):.6f}")

# Same grid for both runs; only the held control value differs.
free = integrate_forward(model, rho0, ControlGrid.constant(0, 20, 1000, 0.0))
driven = integrate_forward(model, rho0, ControlGrid.constant(0, 20, 1000, cfg.constant_amplitude))

c_free = np.array([coherence(r, pairs) for r in free.states])
c_drive = np.array([coherence(r, pairs) for r in driven.states])

# The |0>-|1> coherence only feels the dephasing rate, so the free curve is
# a clean exponential with exponent 2 * gamma_d.
analytic = c_free[0] * np.exp(-2 * cfg.qutrit.gamma_d * free.times)
print(f"free:   C(20) = {c_free[-1]:.6f}   analytic {analytic[-1]:.6f}")
print(f"driven: C(20) = {c_drive[-1]:.6f}   range [{c_drive.min():.3f}, {c_drive.max():.3f}]")

for t in (0, 5, 10, 15, 20):
    m = int(t / 20 * 1000)
    print(f"  t = {t:4.1f}   free {c_free[m]:.4f}   driven {c_drive[m]:.4f}   Re rho01 {driven.states[m, 0, 1].real:+.4f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(free.times, c_free, label="u = 0")
    ax.plot(driven.times, c_drive, label=f"u = {cfg.constant_amplitude}")
    ax.plot(free.times, analytic, "k:", lw=1, label="exp(-2 gamma_d t)")
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("C(rho)")
    ax.legend()
    fig.tight_layout()
    fig.savefig("free_and_driven.png", dpi=120)
    print("wrote free_and_driven.png")
