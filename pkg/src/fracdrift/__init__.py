"""fracdrift: pseudo-spectral fractional diffusion transport on a periodic box.

Simulates the dissipative quasi-geostrophic equation and its prescribed
velocity transport variant, and numerically certifies the machinery behind
their regularity theory: molecule evolution bounds, the duality transfer
identity, maximum/positivity principles, Picard contraction, and
Besov/Hoelder norm estimates.
"""

from .analysis import (
    BesovChainReport,
    NormReport,
    besov_seminorm,
    bmo_norm,
    check_besov_chain,
    check_distance_power_lemma,
    dissipation_functional,
    holder_seminorm,
    lp_norm,
    norm_report,
    range_monitor,
    sobolev_alpha_energy,
)
from .evolution import (
    EquationSpec,
    ForwardRun,
    PicardReport,
    RecordedVelocity,
    SolverState,
    StaticVelocity,
    ZeroVelocity,
    contraction_horizon,
    etd_step,
    mollify_velocity,
    picard_solve,
    run_backward,
    run_forward,
    sqg_velocity,
)
from .molecules import (
    MoleculeLedger,
    MoleculeSpec,
    concentration_integral,
    center_velocity,
    gamma_of_sigma,
    iteration_schedule,
    make_molecule,
    run_molecule_experiment,
    target_g,
    transfer_residual,
    unit_ball_volume,
    validate_molecule,
)
from .spectral import (
    Field,
    Grid,
    Multiplier,
    apply_multiplier,
    constant_field,
    coordinates,
    dealias,
    divergence_of_product,
    field_from_function,
    field_from_values,
    fractional_laplacian,
    inner_product,
    riesz_transform,
    semigroup_step,
    transform,
    wavevectors,
)

__version__ = "0.1.0"
