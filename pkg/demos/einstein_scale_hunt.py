"""Find the Einstein metric hiding inside a conformal class.

The catalog's conf_flat_poly4 entry is a polynomial conformal factor
times the flat metric: not Einstein as written, but conformally flat,
so an Einstein representative exists. The rank of the stacked tractor
obstruction equations counts the candidate scales, and rescaling by the
recorded factor lands on the Einstein metric exactly.
"""
import numpy as np

from detourcert import catalog, prolong
from detourcert.connections import tractor_connection
from detourcert.geometry import Geometry, conformal_rescale, value_array

entry = catalog.get("conf_flat_poly4")
point = (0.2, -0.3, 0.4, 0.1)


def tf_ricci(geom):
    ric = value_array(geom.ricci)
    gv = value_array(geom.g)
    gi = value_array(geom.ginv)
    scal = float(np.einsum("ab,ab->", gi, ric))
    return float(np.max(np.abs(ric - (scal / 4.0) * gv)))


geom = Geometry(entry.spec(), point, order=6)
print(f"trace-free Ricci of the written metric : {tf_ricci(geom):.3e}")

dim = prolong.kernel_dimension(tractor_connection(geom))
print(f"parallel tractors (candidate scales)   : {dim}")

rescaled = conformal_rescale(entry.spec(), f"-log({entry.einstein_scale})")
geom2 = Geometry(rescaled, point, order=6)
print(f"trace-free Ricci after rescaling       : {tf_ricci(geom2):.3e}")

bump = catalog.get("generic_bump4")
geom3 = bump.geometry(point, order=6)
print(f"same count on a generic bump           : "
      f"{prolong.kernel_dimension(tractor_connection(geom3))}")
print("no parallel tractor, no Einstein scale anywhere in that class")
