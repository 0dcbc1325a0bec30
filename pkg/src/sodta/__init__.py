"""System-optimal dynamic traffic assignment with signal control on cell networks."""

from .demand import DemandProfile, Horizon, make_regime_profile
from .formulation import ObjectiveConfig, ObjectiveKind, assemble
from .network import Network, build_paper_network, validate_network
from .signals import GreenPlan, SignalKind, SignalModelConfig, extract_green_plan

__version__ = "0.1.0"

__all__ = [
    "DemandProfile", "GreenPlan", "Horizon", "Network", "ObjectiveConfig", "ObjectiveKind",
    "SignalKind", "SignalModelConfig", "assemble", "build_paper_network", "extract_green_plan",
    "make_regime_profile", "validate_network",
]
