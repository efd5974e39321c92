"""Numerical construction of frames in which the components of a
derivation of the tensor algebra (a linear connection in particular)
vanish along a path, with checks of their holonomicity."""

from .derivations import (
    ConnectionField,
    SDerivationField,
    connection_components,
    connection_derivation,
    connection_in_frame,
    derivation_components,
    torsion_of_derivation,
    torsion_tensor,
    transform_components,
)
from .errors import (
    ArgumentError,
    ConfigError,
    ConstructionError,
    DegeneracyError,
    DomainError,
    EvaluationError,
    GeometryError,
    NotAConnectionError,
    PathFramesError,
)
from .extension import (
    CoordinateExtension,
    extend_to_coordinates,
    holonomicity_on_path,
    torsion_free_on_path,
)
from .geometry import (
    ChartDomain,
    FrameField,
    PathCurve,
    TubeMap,
    affine_tube,
    circle_path,
    commutation_coefficients,
    finite_difference_jacobian,
    latitude_path,
    line_path,
    tensor_norm,
)
from .ivp import FundamentalSolution, solve_matrix_ivp, uniform_grid
from .scenarios import describe, list_geometries, load_config, run_scenario
from .special_frames import (
    TransportSolution,
    TubeFrameSolution,
    derivative_along_path,
    is_linear_along_path,
    special_frame_all_fields,
    special_frame_along_path,
    transport_along,
    verify_transition_constancy,
)

__version__ = "0.1.0"
