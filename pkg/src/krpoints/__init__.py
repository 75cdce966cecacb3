"""Critical points of the two-vortex Kirchhoff-Routh function on punctured planar domains."""

from .geometry import (
    Curve,
    Disk,
    Ellipse,
    Point2,
    PuncturedDomain,
    boundary_points,
    contains,
    dist_to_boundary,
)
from .greens import (
    GreenModel,
    MFSConfig,
    RobinData,
    disk_green,
    disk_model,
    exterior_disk_model,
    fundamental_solution,
    green_eval,
    mfs_fit,
    robin,
)
from .kr import (
    KREvaluator,
    VortexConfig,
    kr_grad,
    kr_hess,
    kr_value,
    kr_value_general_k,
)
from .critical import (
    ClassifyThresholds,
    CriticalPoint,
    DegreeReport,
    RefineError,
    SearchConfig,
    classify_type,
    enumerate_critical_points,
    gauge_fix_annulus,
    local_degree_box,
    newton_refine,
)
from .asymptotics import (
    Constants,
    PredictionSet,
    constants,
    eig2,
    ftilde_eps,
    k_of_r,
    limit_system_check,
    matrix_M0,
    matrix_Mbar_M1,
    matrix_Mtilde,
    predict,
    type2_disk_h,
    type2_disk_solve,
    type2_disk_thresholds,
    type2_heps_root,
    type2_r_eps,
)
from .validate import (
    FitResult,
    SweepResult,
    analysis_flags,
    count_audit,
    fit_power_law,
    identity_check_report,
    sweep,
)

__version__ = "0.1.0"
