"""Potential-theory toolkit for scalar-flat conformal metrics on sphere domains.

Submodules:

* :mod:`scalarflat.geometry`  -- stereographic projection and conformal covariance checks
* :mod:`scalarflat.measure`   -- finite measures with ball-mass queries
* :mod:`scalarflat.potential` -- Newtonian, Wolff and Bessel potentials
* :mod:`scalarflat.capacity`  -- capacity upper bounds and polarity certificates
* :mod:`scalarflat.metric`    -- curve lengths, probes, ray finder, completeness verdicts
* :mod:`scalarflat.cli`       -- scenario files, orchestration and reports
"""

__version__ = "0.1.0"

from .capacity import (
    CapacityBound,
    EvaluationSet,
    PolarityCertificate,
    capacity_upper,
    polarity_certificate,
    selfsimilar_polarity,
)
from .errors import ScalarFlatError
from .geometry import conformal_factor_U, stereo_lift, stereo_project, verify_conformal_covariance
from .measure import (
    AtomicMeasure,
    CantorProduct,
    KPlanePatch,
    dirac,
    make_cantor_measure,
    make_kplane_measure,
    normalize,
)
from .metric import (
    CompletenessReport,
    ConformalMetric,
    completeness_verdict,
    curve_length,
    divergence_probe,
    ray_finder,
)
from .potential import (
    CapacityParams,
    WolffProfile,
    bessel_kernel,
    dyadic_wolff_profile,
    newtonian_potential,
    wolff_general,
    wolff_specialized,
)

__all__ = [
    "AtomicMeasure",
    "CantorProduct",
    "CapacityBound",
    "CapacityParams",
    "CompletenessReport",
    "ConformalMetric",
    "EvaluationSet",
    "KPlanePatch",
    "PolarityCertificate",
    "ScalarFlatError",
    "WolffProfile",
    "bessel_kernel",
    "capacity_upper",
    "completeness_verdict",
    "conformal_factor_U",
    "curve_length",
    "dirac",
    "divergence_probe",
    "dyadic_wolff_profile",
    "make_cantor_measure",
    "make_kplane_measure",
    "newtonian_potential",
    "normalize",
    "polarity_certificate",
    "ray_finder",
    "selfsimilar_polarity",
    "stereo_lift",
    "stereo_project",
    "verify_conformal_covariance",
    "wolff_general",
    "wolff_specialized",
]
