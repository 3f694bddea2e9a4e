"""cclab: exact computation with positive real cocycles on finite
equivalence relations.

The package models finite instances of countable weighted equivalence
relations, the quotients and finite subrelations that organize them,
and the two mutually exclusive phenomena the mass identity separates:
invariant probability measures and strict compressions.  See README.md
for the operation catalogue and CLI.
"""

from cclab.core import (
    EXACT,
    FLOAT,
    Cocycle,
    CycleInconsistencyError,
    DisconnectedPresentationError,
    FiniteSubrelation,
    FormatError,
    Instance,
    Interval,
    ModelError,
    NoCertifiedDefectError,
    NotCertifiedAperiodicError,
    NotLacunaryError,
    build_instance,
    coboundary_check,
    cocycle_from_edges,
    is_constant_cocycle,
    quotient_by,
    restrict_to_classes,
    rho_eval,
    rho_size,
    weight_mass,
)
from cclab.tower import (
    DefectFamily,
    Tower,
    build_tower,
    class_share,
    compose_refinements,
    nu_table,
    validate_tower,
)
from cclab.examples import (
    KINDS,
    column_tower,
    doubling_tower,
    generate,
    odometer_tower,
    resolve_mode,
    smooth_transversal,
)
from cclab.lacunarity import (
    Coloring,
    LacunarityGraph,
    compact_interval_coloring,
    complete_independent,
    greedy_coloring,
    lacunarity_graph,
    lacunary_order_split,
    lacunary_partition,
    quotient_independence_transfer,
    verify_coloring,
)
from cclab.measures import (
    DensityWitness,
    FiberIdentityReport,
    InvarianceReport,
    MeasureCertificate,
    MeasureReport,
    SolveResult,
    TowerLimitReport,
    TowerMeasureCertificate,
    WeightedMeasure,
    class_measure,
    consistent_class_measures,
    default_eps_schedule,
    defect_to_compression,
    density_witness,
    density_witness_parts,
    dichotomy_solve,
    extend_from_dense,
    fiber_identity,
    invariant_mixture,
    push_cohomologous,
    rotation_to_compression,
    tower_limit,
    verify_invariance,
    verify_measure,
)
from cclab.compression import (
    COMPRESSION_MODES,
    OVER_F,
    PLAIN,
    QUOTIENT,
    CompressionCertificate,
    CompressionReport,
    TowerCompressionCertificate,
    lift_compression,
    strictly_increasing_injection,
    strictly_increasing_injection_instance,
    verify_compression,
)
from cclab.approximation import (
    BALANCE,
    CUSTOM,
    DENSITY,
    FAMILY_KINDS,
    FLATTEN,
    BalanceResult,
    DensityApproximation,
    FamilyResult,
    FamilySpec,
    FlattenResult,
    SmoothPart,
    balance,
    density_approximation,
    flatten,
    maximal_family,
)
from cclab.fileio import (
    FORMAT_VERSION,
    canonical_dumps,
    certificate_to_data,
    coloring_to_data,
    data_to_certificate,
    data_to_coloring,
    data_to_instance,
    data_to_tower,
    file_digest,
    instance_to_data,
    read_any,
    read_certificate,
    tower_to_data,
    write_certificate,
    write_target,
)
from cclab.report import (
    REPORT_SCHEMA,
    RunReport,
    SummaryTable,
    render_csv,
    render_figure,
    render_text,
    summarize,
)
from cclab import oracles

__version__ = "0.1.0"

__all__ = [
    "EXACT",
    "FLOAT",
    "Cocycle",
    "CycleInconsistencyError",
    "DisconnectedPresentationError",
    "FiniteSubrelation",
    "FormatError",
    "Instance",
    "Interval",
    "ModelError",
    "NoCertifiedDefectError",
    "NotCertifiedAperiodicError",
    "NotLacunaryError",
    "build_instance",
    "coboundary_check",
    "cocycle_from_edges",
    "is_constant_cocycle",
    "quotient_by",
    "restrict_to_classes",
    "rho_eval",
    "rho_size",
    "weight_mass",
    "DefectFamily",
    "Tower",
    "build_tower",
    "class_share",
    "compose_refinements",
    "nu_table",
    "validate_tower",
    "KINDS",
    "column_tower",
    "doubling_tower",
    "generate",
    "odometer_tower",
    "resolve_mode",
    "smooth_transversal",
    "Coloring",
    "LacunarityGraph",
    "compact_interval_coloring",
    "complete_independent",
    "greedy_coloring",
    "lacunarity_graph",
    "lacunary_order_split",
    "lacunary_partition",
    "quotient_independence_transfer",
    "verify_coloring",
    "DensityWitness",
    "FiberIdentityReport",
    "InvarianceReport",
    "MeasureCertificate",
    "MeasureReport",
    "SolveResult",
    "TowerLimitReport",
    "TowerMeasureCertificate",
    "WeightedMeasure",
    "class_measure",
    "consistent_class_measures",
    "default_eps_schedule",
    "defect_to_compression",
    "density_witness",
    "density_witness_parts",
    "dichotomy_solve",
    "extend_from_dense",
    "fiber_identity",
    "invariant_mixture",
    "push_cohomologous",
    "rotation_to_compression",
    "tower_limit",
    "verify_invariance",
    "verify_measure",
    "COMPRESSION_MODES",
    "OVER_F",
    "PLAIN",
    "QUOTIENT",
    "CompressionCertificate",
    "CompressionReport",
    "TowerCompressionCertificate",
    "lift_compression",
    "strictly_increasing_injection",
    "strictly_increasing_injection_instance",
    "verify_compression",
    "BALANCE",
    "CUSTOM",
    "DENSITY",
    "FAMILY_KINDS",
    "FLATTEN",
    "BalanceResult",
    "DensityApproximation",
    "FamilyResult",
    "FamilySpec",
    "FlattenResult",
    "SmoothPart",
    "balance",
    "density_approximation",
    "flatten",
    "maximal_family",
    "FORMAT_VERSION",
    "canonical_dumps",
    "certificate_to_data",
    "coloring_to_data",
    "data_to_certificate",
    "data_to_coloring",
    "data_to_instance",
    "data_to_tower",
    "file_digest",
    "instance_to_data",
    "read_any",
    "read_certificate",
    "tower_to_data",
    "write_certificate",
    "write_target",
    "REPORT_SCHEMA",
    "RunReport",
    "SummaryTable",
    "render_csv",
    "render_figure",
    "render_text",
    "summarize",
    "oracles",
    "__version__",
]
