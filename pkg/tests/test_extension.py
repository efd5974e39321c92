import math

import numpy as np
import pytest

from pathframes.derivations import torsion_tensor
from pathframes.errors import GeometryError
from pathframes.extension import (
    HolonomicityResult,
    extend_to_coordinates,
    holonomicity_on_path,
    torsion_free_on_path,
    torsion_norms_on_path,
)
from pathframes.geometry import (
    affine_tube,
    circle_path,
    finite_difference_jacobian,
    latitude_path,
    line_path,
)
from pathframes.scenarios import GEOMETRIES
from pathframes.special_frames import special_frame_all_fields, transport_along

# smallest measured ratio of the commutator norm to kappa for the constant-torsion
# geometry (exactly 2 in the infinity norm); frozen as a regression bound
COMMUTATOR_PER_KAPPA = 2.0


@pytest.fixture(scope="module")
def sphere_arc_extension(sphere):
    path = latitude_path(math.pi / 3, 0.0, math.pi / 2, chart=sphere.chart)
    sol = transport_along(sphere, path)
    tube = affine_tube(sol.path)
    ext = extend_to_coordinates(sol.frame_at, tube, grid=sol.grid,
                                dA_on_path=sol.derivative_at, check_stride=20)
    return sol, tube, ext


def test_identity_frame_gives_translation(flat, rng):
    path = line_path([0.5, 0.5], [1.5, 2.5], chart=flat.chart)
    tube = affine_tube(path)
    x0 = np.array([10.0, -3.0])
    ext = extend_to_coordinates(lambda s: np.eye(2), tube, x0=x0, dA_on_path=lambda s: np.zeros((2, 2)))
    _, points = tube.sample(15, 5)
    for x in points:
        assert np.max(np.abs(ext.x_prime(x) - (x - path.point(0.0) + x0))) < 1e-12


def test_jacobian_matches_inverse_frame(sphere_arc_extension):
    _, _, ext = sphere_arc_extension
    assert np.max(ext.jacobian_mismatch) < 5e-6


def test_coordinate_basis_matches_frame(sphere_arc_extension):
    sol, _, ext = sphere_arc_extension
    assert np.max(ext.basis_mismatch) < 5e-6
    frame = ext.coordinate_frame()
    for s in ext.check_grid[::10]:
        assert np.max(np.abs(frame(sol.path.point(s)) - sol.frame_at(s))) < 1e-10


def test_jacobian_determinant_stays_local(sphere_arc_extension):
    _, tube, ext = sphere_arc_extension
    lo, hi = ext.det_ratio
    assert 0.5 <= lo <= hi <= 2.0
    _, points = tube.sample(40, 5)
    dets = np.array([np.linalg.det(ext.jacobian(x)) for x in points])
    assert np.all(dets > 0)


def test_semi_analytic_jacobian_off_path(sphere_arc_extension):
    _, tube, ext = sphere_arc_extension
    for s, t in ((0.3, 0.02), (1.1, -0.03)):
        x = tube.eta(s, [t])
        J_fd = finite_difference_jacobian(ext.x_prime, x, 1e-6).T
        assert np.max(np.abs(J_fd - ext.jacobian(x))) < 1e-6


def test_extension_frame_is_holonomic(sphere_arc_extension):
    sol, _, ext = sphere_arc_extension
    result = holonomicity_on_path(ext.coordinate_frame(), sol.path, np.linspace(0, math.pi / 2, 15))
    assert result.verdict == "holonomic"
    assert result.max_norm < 1e-5


def test_extension_of_torsion_frame_is_still_holonomic(torsion_const):
    path = line_path([0, 0], [1, 1], chart=torsion_const.chart)
    sol = transport_along(torsion_const, path)
    ext = extend_to_coordinates(sol.frame_at, affine_tube(sol.path), grid=sol.grid,
                                dA_on_path=sol.derivative_at, check_stride=100)
    result = holonomicity_on_path(ext.coordinate_frame(), path, np.linspace(0, 1, 11))
    assert result.verdict == "holonomic"


def test_extension_refuses_non_injective_tube(flat):
    path = circle_path([0.0, 0.0], 1.0, 0.0, 2 * math.pi, chart=flat.chart)
    with pytest.raises(GeometryError):
        extend_to_coordinates(lambda s: np.eye(2), affine_tube(path))


def test_sphere_special_frame_holonomic(sphere):
    path = latitude_path(math.pi / 3, 0.0, 1.5, chart=sphere.chart)
    sol = special_frame_all_fields(sphere, affine_tube(path), check_stride=500)
    result = holonomicity_on_path(sol.frame, path, np.linspace(0, 1.5, 11))
    assert result.verdict == "holonomic"


@pytest.mark.parametrize("kappa", [0.1, 0.3, 1.0])
def test_torsion_special_frame_anholonomic(kappa):
    conn = GEOMETRIES["torsion-const"].connection({"kappa": kappa})
    path = line_path([0, 0], [1, 1], chart=conn.chart)
    sol = special_frame_all_fields(conn, affine_tube(path), check_stride=500)
    result = holonomicity_on_path(sol.frame, path, np.linspace(0, 1, 11))
    assert result.verdict == "anholonomic"
    torsion_scale = float(np.max(torsion_norms_on_path(conn, path, grid=np.linspace(0, 1, 11))))
    assert abs(result.max_norm - torsion_scale) <= 0.1 * torsion_scale
    assert result.max_norm >= 0.9 * COMMUTATOR_PER_KAPPA * kappa


def test_commutator_is_minus_torsion_in_special_frame(torsion_const):
    path = circle_path([0.0, 0.0], 1.0, 0.0, 1.2, chart=torsion_const.chart)
    sol = special_frame_all_fields(torsion_const, affine_tube(path), check_stride=500)
    result = holonomicity_on_path(sol.frame, path, np.linspace(0, 1.2, 9))
    for s, C in zip(result.grid, result.coefficients):
        T = torsion_tensor(torsion_const, sol.frame, path.point(s), h=1e-4)
        assert np.max(np.abs(C + T)) < 1e-5


def test_torsion_gate(sphere, flat, torsion_const):
    line = line_path([0.5, 0.0], [1.5, 1.0])
    assert torsion_free_on_path(sphere, line_path([0.6, 0.0], [1.3, 1.0], chart=sphere.chart))
    norms = torsion_norms_on_path(flat, line)
    assert np.all(norms == 0) and torsion_free_on_path(flat, line)
    assert not torsion_free_on_path(torsion_const, line)
    assert np.max(torsion_norms_on_path(torsion_const, line)) == pytest.approx(0.6)


def test_verdict_gap_is_inconclusive():
    grid = np.zeros(1)
    coeffs = np.zeros((1, 2, 2, 2))
    assert HolonomicityResult(grid, np.array([5e-6]), coeffs, 1e-5).verdict == "holonomic"
    assert HolonomicityResult(grid, np.array([5e-5]), coeffs, 1e-5).verdict == "inconclusive"
    assert HolonomicityResult(grid, np.array([2e-4]), coeffs, 1e-5).verdict == "anholonomic"
