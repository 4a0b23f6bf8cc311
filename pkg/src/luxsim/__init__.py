"""luxsim: radiosity-based dense illuminance simulation.

Converts scene geometry (triangle mesh or depth grid), per-patch
reflectance, and luminaire photometry into per-patch illuminance and
virtual luxmeter readings. Emission and sensor-sensitivity curves are
folded into the form-factor stage so the transport stays a single linear
solve.
"""

__version__ = "0.1.0"

from .albedo import AlbedoMap, LightImage, estimate_albedo, map_albedo_to_patches
from .errors import (
    DegenerateEmitterError,
    FormatError,
    GeometryError,
    LuxsimError,
    NumericalError,
    ValidationError,
)
from .formfactor import (
    FormFactorMatrix,
    RectifyStats,
    compute_form_factors,
    load_ffm,
    rectify,
    save_ffm,
    sensor_gain_rows,
)
from .mesh import (
    DepthImage,
    Patch,
    PinholeCamera,
    TriangleMesh,
    derive_patches,
    load_mesh,
    mesh_from_depth,
    save_mesh,
)
from .photometry import PhotometricCurve, flat_curve, load_curve
from .radiosity import (
    LuxmeterReading,
    RadiositySolution,
    RadiositySystem,
    assemble,
    illuminance,
    luxmeter_read,
    neumann_solve,
    radiance_to_illuminance,
    solve,
)
from .raycast import AccelStructure, RayHit, build_accel, first_hit
from .sampling import (
    DirectionSet,
    SamplerConfig,
    isocell_directions,
    monte_carlo_directions,
    to_world_frame,
)
from .scene import Luminaire, RectifyConfig, Scenario, Scene, Sensor, SolverConfig, load_scene
