"""
Coordinates adapted to a transported frame
==========================================

A frame known only along a path can always be realised as the coordinate
basis of some local coordinates, whatever the connection.  Build them for
the constant-torsion geometry and check the Jacobian on the path.
"""

import numpy as np

from pathframes import affine_tube, extend_to_coordinates, holonomicity_on_path, line_path
from pathframes import transport_along
from pathframes.scenarios import GEOMETRIES

conn = GEOMETRIES["torsion-const"].connection()
path = line_path([0.0, 0.0], [1.0, 1.0], chart=conn.chart)
sol = transport_along(conn, path, B=np.array([[1.0, 0.2], [0.0, 1.0]]))

tube = affine_tube(sol.path)
ext = extend_to_coordinates(sol.frame_at, tube, grid=sol.grid,
                            dA_on_path=sol.derivative_at, check_stride=50)

print("max |dx'/dx - A^-1| on the path:", ext.jacobian_mismatch.max())
print("max |d/dx' - E| on the path:    ", ext.basis_mismatch.max())
print("det(dx'/dx) relative to the path, over the tube:", ext.det_ratio)

# a few points of the new chart
for s, t in ((0.0, 0.0), (0.5, 0.0), (0.5, 0.03), (1.0, -0.03)):
    x = tube.eta(s, [t])
    print(f"x={np.round(x, 4)}  x'={np.round(ext.x_prime(x), 6)}")

# being a coordinate basis, the extended frame commutes
holo = holonomicity_on_path(ext.coordinate_frame(), path, np.linspace(0, 1, 11))
print("commutators of d/dx':", holo.max_norm, holo.verdict)
