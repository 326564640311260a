"""Quasienergy atlases, transition cocycles, and surface holonomies for
periodically driven quantum systems.

The package decomposes one-period propagators into Floquet form, continues
quasienergy branches into chart-local sections over the drive-parameter
circle, extracts the scalar phases and integer windings gluing those
sections on overlaps, assembles the two-form connection data and its
surface holonomy over parameter loops, and verifies every layer against
brute-force propagation.
"""

from .atlas import (
    AnholonomyResult,
    Chart,
    CircleAtlas,
    CocycleReport,
    CohomologyClasses,
    LocalSection,
    TransitionDatum,
    build_canonical_sections,
    build_circle_atlas,
    build_local_section,
    canonical_kicked_atlas,
    compute_all_transitions,
    compute_cohomology_classes,
    compute_transition_datum,
    detect_anholonomy,
    extract_phi_at,
    forward_handoff_point,
    signed_phi_and_winding_at,
    triple_z_at,
    verify_cocycles,
)
from .config import RunConfig, config_from_dict, load_config
from .errors import (
    BranchMismatchError,
    ConfigError,
    ContinuationError,
    CrossingError,
    DegenerateSpectrumError,
    FloquetGerbeError,
    GridError,
    ScheduleError,
    UnitarityError,
    VerificationError,
)
from .floquet import (
    FloquetDecomposition,
    QuasienergyState,
    floquet_decompose,
    moore_stedman_phase_split,
    quasienergy_state,
    reconstruct_propagator,
)
from .gerbe import (
    AForm,
    BForm,
    ConnectionForms,
    GluingReport,
    RestrictedGauge,
    apply_gauge,
    assemble_a,
    assemble_b,
    assemble_h,
    coboundary_of_3cochain,
    connection_forms,
    cup_coboundary_witness,
    curvature_h,
    transform_connection_forms,
    verify_gerbe_gluing,
)
from .holonomy import (
    AdiabaticPrediction,
    ConvergenceTable,
    LoopSchedule,
    SurfaceHolonomy,
    adiabatic_prediction,
    dynamical_phase,
    kicked_linear_loop,
    make_loop_schedule,
    surface_holonomy,
    verify_against_exact,
    worked_loop_reference_phase,
)
from .models import KickedTwoLevelModel, PeriodicHamiltonianModel, dipole_drive_model
from .propagator import (
    UnitaryMatrix,
    free_evolution,
    kick_unitary,
    monodromy,
    propagate_exact,
    propagate_ode,
    smoothed_kick_model,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
