"""Gauge directions are invisible to the linearized obstruction tensor.

Perturbing a metric by the trace-free symmetrized gradient of a vector
field only moves it along its conformal orbit, so on an obstruction-flat
background the linearized Bach tensor must annihilate every such
perturbation. A generic perturbation of the same size is very visible.
"""
import numpy as np

from detourcert import catalog, detour, jets
from detourcert.jets import multi_indices

rng = np.random.default_rng(41)
geom = catalog.get("sphere4").geometry((0.8, 1.1, 0.9, 2.0), order=6)


def rand_jet(order, scale=0.5):
    return jets.from_coeffs(
        rng.normal(0.0, scale, len(multi_indices(4, order))), 4, order)


print("linearized obstruction on the round sphere:")
for trial in range(3):
    v = np.array([rand_jet(3).padded(6) for _ in range(4)], dtype=object)
    h = detour.op_K0(v, geom)
    moved = detour.linearized_bach(h.comps, geom)
    print(f"  gauge direction K0(v), trial {trial}: "
          f"{max(abs(j.value) for j in moved.flat):.3e}")

h = np.empty((4, 4), dtype=object)
for a in range(4):
    for b in range(a, 4):
        h[a, b] = h[b, a] = rand_jet(3).padded(6)
moved = detour.linearized_bach(h, geom)
print(f"  generic symmetric h, same size   : "
      f"{max(abs(j.value) for j in moved.flat):.3e}")
print("the gauge slice is flat to machine precision; the complement is not")
