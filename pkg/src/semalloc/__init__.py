"""Semantic edge-data filtering and stochastic reservation planning.

Buyers (VSPs) purchase filtered sensing data from edge devices either in
advance (membership plus bundles of transmissions) or on demand once their
demand is known. The package filters captured objects by label/interest
similarity, accounts transmission energy, and solves the resulting two-stage
stochastic integer program exactly.
"""

__version__ = "0.1.0"

from .baselines import PolicyComparison, compare, random_policy, solve_evf
from .energy import (
    EnergyLedger,
    energy_efficiency,
    energy_per_transmission,
    pue,
    transmission_energy,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    InfeasibleError,
    SemallocError,
    ValidationError,
)
from .model import EdgeDevice, MarketConfig, Vsp, build_config, emit_config, load_config
from .recourse import (
    FirstStageDecision,
    RecoursePlan,
    SolveResult,
    evaluate_decision,
    optimal_recourse,
)
from .scenarios import (
    Distribution,
    Scenario,
    ScenarioSet,
    ScenarioSpec,
    load_scenarios,
    sample_scenarios,
)
from .semantic import (
    HashEmbedder,
    LabeledObject,
    LookupEmbedder,
    cosine_similarity,
    embed,
    filter_semantic,
)
from .sip import solve_enumeration, solve_structural
