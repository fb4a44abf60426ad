"""Equilibrium-state structure of finite-rank product systems over Z+^N."""

from .model import (
    DynamicsSpec,
    GraphSpec,
    IdealLattice,
    MflSpec,
    ValidatedInstance,
    VertexIdeal,
    compute_cnp_ideals,
    compute_fI,
    instance_from_dict,
    load_instance,
    mfl_allowable_words,
    multidegree_transfer,
    transfer_map,
    validate,
    zero_lattice,
)
from .entropy import (
    EntropyReport,
    entropy_report,
    fiber_entropy,
    mfl_entropy,
    strong_entropy,
    system_entropy,
    tracial_entropy,
)
from .simplex import (
    PhaseDiagram,
    TraceSimplexResult,
    avt_traces,
    f_trace_set,
    finite_trace_set,
    full_simplex,
    is_member,
    phase_diagram,
)
from .equilibrium import (
    EquilibriumStateHandle,
    GroundStateDescription,
    MonomialQuery,
    PartitionValue,
    WoldDecomposition,
    build_state,
    evaluate_state,
    ground_states,
    partition_value,
    state_on_QF,
    wold_decompose,
)
from .fock import (
    IdentityReport,
    OracleValue,
    TruncatedFock,
    build_fock,
    check_identities,
    check_kms,
    conditional_expectation,
    oracle_state_eval,
    projection,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
