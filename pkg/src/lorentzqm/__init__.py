"""Lorentz quantum mechanics: dynamics generated by ``sigma_{m,n} H``."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .minkowski import (  # noqa: F401
    MinkowskiMetric, SpinorState, Causality, CausalClass, LorentzMap,
    interval, classify, sigma_inner, make_boost, apply_map, conjugate_operator,
)
from .generator import (  # noqa: F401
    Stability, BdgGenerator, EigenSystem, build_generator, from_mdecomp, eigensolve,
    to_energy_representation, verify_completeness, tau_matrices, tau_decompose,
)
from .evolution import (  # noqa: F401
    Propagator, EvolutionTrace, propagator, evolve, evolve_timedep,
    heisenberg_evolve, heisenberg_residual,
)
from .geometry import (  # noqa: F401
    ParameterPath, BerryResult, adiabatic_element, berry_phase_loop, curvature_map,
    flux_density_profile, total_flux, adiabatic_sweep,
)
from .models import (  # noqa: F401
    FermiGasParams, fermi_gas_generator, VortexField, vortex_generator, vortex_berry_phase,
    AfmParams, afm_generator, afm_dispersion,
)
