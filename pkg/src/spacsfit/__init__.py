"""Estimation of SPACS state parameters and detection-fidelity bounds
from phase-tagged homodyne quadrature data."""

from .bounds import (
    FidelityBounds,
    fidelity_report,
    sub_fidelity_modified,
    super_fidelity,
    theoretical_traces,
)
from .data import (
    Histogram,
    QuadratureDataset,
    asymmetry_report,
    default_phase_grid,
    empirical_cf,
    histogram,
    load_dataset,
    sample_dataset,
    save_dataset,
)
from .estimator import (
    EstimationResult,
    OptimizerOptions,
    ScanCurve,
    estimate,
    parameter_errors,
    scan_cut,
)
from .fock import (
    DensityMatrix,
    apply_loss,
    spacs_state,
    sub_fidelity_exact,
    tomogram_of,
    trace_functionals,
)
from .models import (
    DarkCountMixtureParams,
    SpacsModelParams,
    TomogramModel,
    coherent_tomogram,
    dark_count_model,
    dark_count_tomogram,
    lossy_convolution_numeric,
    spacs_model,
    spacs_tomogram,
)
from .overlaps import (
    AnalyticSource,
    DistanceEngine,
    EmpiricalCF,
    FunctionalResult,
    IntegrationConfig,
    analytic_source,
    hs_distance_error,
    hs_distance_sq,
    overlap_tomographic,
    purity_from_data,
)

__version__ = "0.1.0"
