"""retmap: attribute maps, adaptive ETDRS grids, and group statistics for
retinal OCT layer data."""

from .attributes import (
    AttributeKind,
    AttributeMap,
    attribute_profile,
    compute_attribute_map,
    mean_curvature_at,
    mean_reflectivity_at,
    thickness_at,
)
from .dataset import (
    BoundarySurface,
    Dataset,
    Segmentation,
    load_cohort,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .errors import (
    CapabilityError,
    CohortSpecError,
    DomainMismatchError,
    FormatError,
    GridEditError,
    InsufficientDataError,
    RetmapError,
    SelectionError,
    ValidationError,
)
from .geometry import (
    AcquisitionGeometry,
    EnFaceDomain,
    enface_to_physical,
    physical_to_enface,
    polygon_mask,
)
from .grids import (
    AdaptiveGrid,
    CellSummary,
    EtdrsLayout,
    GridCell,
    cell_mask,
    cell_point_membership,
    compression_ratio,
    etdrs_base_grid,
    fit_common_grid,
    fit_grid,
    grid_from_dict,
    grid_to_dict,
    merge_children,
    refit_grid,
    split_cell,
    summarize_cell,
)
from .stats import (
    ComparisonConfig,
    ComparisonMap,
    ControlModel,
    DeviationMap,
    MeasurementSummary,
    Region,
    TestResult,
    adjust_pvalues,
    build_control_model,
    compare_gridwise,
    compare_pointwise,
    deviation_map,
    effect_size,
    extract_significant_regions,
    measure_region,
    two_sample_test,
)
from .synthetic import CohortSpec, DefectSpec, generate_synthetic_cohort

__version__ = "0.1.0"
