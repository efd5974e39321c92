"""
Transport around a latitude of the sphere
=========================================

Carry a frame once around the circle theta = pi/3 so that the sphere's
connection has no tangential components in it, then read off how far the
frame has turned.
"""

import math

import numpy as np
from scipy.linalg import expm

from pathframes import latitude_path, transport_along
from pathframes.scenarios import GEOMETRIES, holonomy_deficit

sphere = GEOMETRIES["sphere2"]
conn = sphere.connection()
theta0 = math.pi / 3
path = latitude_path(theta0, chart=conn.chart)

# 2000 RK4 steps per unit of the parameter, starting from the coordinate frame
sol = transport_along(conn, path)
print("largest tangential component left:", sol.max_residual)

# Along a latitude the coefficient matrix does not depend on s, so the
# transported frame is a matrix exponential we can write down directly.
W = np.array([[0.0, -math.sin(theta0) * math.cos(theta0)],
              [1.0 / math.tan(theta0), 0.0]])
print("A(2 pi) from the solver:\n", sol.A_grid[-1].round(12))
print("A(2 pi) from expm:\n", expm(-2 * math.pi * W).round(12))

# In an orthonormal basis the loop map is a rotation; its angle is the
# enclosed area of the cap, 2 pi (1 - cos theta0).
angle = holonomy_deficit(sol, sphere.metric(path.point(0.0)))
print(f"rotation angle {angle:.12f}, cap area {2 * math.pi * (1 - math.cos(theta0)):.12f}")

# Other latitudes turn by other amounts.
for th in (0.3, 0.8, 1.2):
    s = transport_along(conn, latitude_path(th, chart=conn.chart), steps_per_unit=500)
    a = holonomy_deficit(s, sphere.metric(np.array([th, 0.0])))
    print(f"theta0={th:.3f}  angle={a:.6f}  expected={2 * math.pi * (1 - math.cos(th)):.6f}")
