"""Hospital resource demand simulation and surrogate-based calibration."""

__version__ = "0.1.0"

from .arrivals import (
    CaseSeries,
    PeakEvent,
    apply_peaks,
    generate_poisson_series,
    load_case_series,
    save_case_series,
    synthetic_series,
)
from .demand import (
    DemandSeries,
    ground_truth_demand,
    load_demand,
    save_demand,
    windowed_incidence,
)
from .engine import (
    PatientPath,
    SimulationResult,
    Visit,
    occupancy,
    replicate,
    sample_duration,
    sample_patient_path,
    simulate_once,
    write_paths,
)
from .errors import (
    AnalysisError,
    FitError,
    IngestionError,
    ParameterError,
    SimulationError,
    StructuralError,
    ValidationError,
    WardflowError,
)
from .kriging import Kriging, expected_improvement
from .objective import (
    EvaluationRecord,
    ObjectiveSpec,
    read_eval_log,
    weighted_rmse,
    write_eval_log,
)
from .optimizer import (
    OptimizationResult,
    fit_surrogate,
    latin_hypercube,
    load_checkpoint,
    optimize,
    propose_infill,
    random_search,
)
from .scenario import (
    ParameterRegistry,
    ParameterSpec,
    ParameterVector,
    ResourceMapping,
    ScenarioConfig,
    StateGraph,
    Transition,
    ValidationReport,
    bind_probabilities,
    canonical_scenario,
    load_scenario,
    save_scenario,
    validate,
)
from .seeding import mix_seed, stream
from .sensitivity import (
    ContourGrid,
    RegressionReport,
    RegressionTree,
    StepwiseRegression,
    TreeNode,
    contour_grid,
    fit_tree,
    stepwise_regression,
    tree_to_dot,
    tree_to_text,
)

__all__ = [
    "AnalysisError",
    "CaseSeries",
    "ContourGrid",
    "DemandSeries",
    "EvaluationRecord",
    "FitError",
    "IngestionError",
    "Kriging",
    "ObjectiveSpec",
    "OptimizationResult",
    "ParameterError",
    "ParameterRegistry",
    "ParameterSpec",
    "ParameterVector",
    "PatientPath",
    "PeakEvent",
    "RegressionReport",
    "RegressionTree",
    "ResourceMapping",
    "ScenarioConfig",
    "SimulationError",
    "SimulationResult",
    "StateGraph",
    "StepwiseRegression",
    "StructuralError",
    "Transition",
    "TreeNode",
    "ValidationError",
    "ValidationReport",
    "Visit",
    "WardflowError",
    "apply_peaks",
    "bind_probabilities",
    "canonical_scenario",
    "contour_grid",
    "expected_improvement",
    "fit_surrogate",
    "fit_tree",
    "generate_poisson_series",
    "ground_truth_demand",
    "latin_hypercube",
    "load_case_series",
    "load_checkpoint",
    "load_demand",
    "load_scenario",
    "mix_seed",
    "occupancy",
    "optimize",
    "propose_infill",
    "random_search",
    "read_eval_log",
    "replicate",
    "sample_duration",
    "sample_patient_path",
    "save_case_series",
    "save_demand",
    "save_scenario",
    "simulate_once",
    "stepwise_regression",
    "stream",
    "synthetic_series",
    "tree_to_dot",
    "tree_to_text",
    "validate",
    "weighted_rmse",
    "windowed_incidence",
    "write_eval_log",
    "write_paths",
]
