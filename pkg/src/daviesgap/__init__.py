"""Davies Lindbladians for finite-dimensional Hamiltonians: spectral gaps,
the embedded classical Markov chain, and arithmetic-progression structure
of spectra, with numerically verified comparison inequalities."""

from .classical import (
    CheegerWitness,
    ClassicalChain,
    bottleneck,
    cheeger_witness,
    classical_dirichlet,
    classical_gap,
    extract_chain,
    rotated_eigenbasis,
    variance_pi,
)
from .davies import (
    DaviesGenerator,
    RateFunction,
    apply_davies,
    build_generator,
    coherent_term_check,
    detailed_balance_residual,
    dirichlet_form,
    hermitianize_pair,
    jump_component,
    kms_inner,
    trace_inequality_residual,
    transition_rate,
    variance,
)
from .gaps import (
    GapReport,
    SubspaceBasis,
    generator_matrix,
    hermitian_gap,
    rayleigh_quotient,
    spectral_gap_full,
    spectral_gap_omega,
    subspace_basis,
)
from .operators import (
    ModelSpec,
    build_field_perturbation,
    build_model,
    build_pauli_hamiltonian,
    build_xyz_ring,
    parse_model,
    pauli_string_matrix,
    site_operator,
    xyz_ring_spectrum,
)
from .spectral import (
    APReport,
    BohrData,
    GibbsState,
    Levels,
    SpectralData,
    ap_length_with_difference,
    bohr_frequencies,
    cluster_levels,
    eigendecompose,
    find_proper_ap,
    gibbs_state,
    project_component,
)

__version__ = "0.1.0"
