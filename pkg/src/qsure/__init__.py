"""Quasi-sure analysis under a finite family of priors.

Capacities and the quasi-sure order (:mod:`qsure.core`), dual
representations of robust risk functionals (:mod:`qsure.risk`), and the
robust FTAP with exact superhedging duality (:mod:`qsure.market`).
"""

from .core import (
    MeasureVector,
    Prior,
    PriorFamily,
    QsVector,
    SampleSpace,
    capacity,
    capacity_continuity,
    ess_sup,
    family_dominance,
    polar_analysis,
    qs_compare,
    qs_norm,
    reduce_family,
    restrict_to_prior,
    sublinear_expectation,
)
from .errors import (
    ArbitrageError,
    ContractError,
    DominationError,
    InvariantError,
    QsError,
    SizeError,
    ValidationError,
)
from .market import (
    Filtration,
    MarketModel,
    Strategy,
    bipolar_check,
    cone_membership,
    ftap_check,
    gains,
    martingale_polytope,
    na_check,
    price_functional,
    superhedge,
    validate_model,
)

__version__ = "0.1.0"
