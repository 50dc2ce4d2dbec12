"""Dynamic-inversion control-law laboratory: ANDI and INDI laws, reference
models, error-dynamics design and a fixed-step closed-loop simulator."""

from .allocation import allocate, right_inverse, superposition_split
from .controllers import (
    AndiController,
    AndiGeneralizedController,
    ControllerInput,
    ControllerKind,
    IndiActuatorController,
    IndiController,
    RmFeedforwardController,
    ScaledIndiController,
)
from .error_spec import ErrorDynamicsSpec, ErrorSolution, expand_cascade
from .model import FirstOrderActuatorBank, FunctionPlant, GeneralizedActuator, RollPlant, second_order_actuator
from .refmodel import FilterRefModel, IndiRollRefModel, PhysicalRefModel, RollRefModel
from .sim import Command, SimConfig, SimTrace, bandwidth_sweep, limit_study, perturbation_study, run_closed_loop

__version__ = "0.1.0"
