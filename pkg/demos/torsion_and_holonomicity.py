"""
Torsion decides whether the special frame is a coordinate frame
================================================================

Build frames on a thin tube around a path in which every component of the
connection vanishes on the path, and measure their commutators there.  A
symmetric connection gives commuting frame vectors; a connection with
torsion cannot.
"""

import numpy as np

from pathframes import affine_tube, holonomicity_on_path, line_path, special_frame_all_fields
from pathframes.extension import torsion_norms_on_path
from pathframes.scenarios import GEOMETRIES

grid = np.linspace(0.0, 1.0, 11)

for name, start, end in (("sphere2", [0.6, 0.0], [1.3, 1.0]),
                         ("polar-flat", [0.5, 0.3], [2.0, 1.0]),
                         ("torsion-const", [0.0, 0.0], [1.0, 1.0])):
    conn = GEOMETRIES[name].connection()
    path = line_path(start, end, chart=conn.chart)
    sol = special_frame_all_fields(conn, affine_tube(path), check_stride=200)
    holo = holonomicity_on_path(sol.frame, path, grid)
    torsion = torsion_norms_on_path(conn, path, grid=grid).max()
    print(f"{name:14s} residual {sol.max_residual:.1e}  torsion {torsion:.3f}  "
          f"commutators {holo.max_norm:.3e}  -> {holo.verdict}")

# The commutator tracks the torsion linearly: doubling kappa doubles it.
print()
for kappa in (0.05, 0.1, 0.2, 0.4):
    conn = GEOMETRIES["torsion-const"].connection({"kappa": kappa})
    path = line_path([0, 0], [1, 1], chart=conn.chart)
    sol = special_frame_all_fields(conn, affine_tube(path), check_stride=500)
    holo = holonomicity_on_path(sol.frame, path, grid)
    print(f"kappa={kappa:.2f}  max commutator={holo.max_norm:.6f}  ratio={holo.max_norm / kappa:.6f}")
