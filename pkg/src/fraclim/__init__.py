"""fraclim: magnetic fractional energies, s-perimeters and singular limits."""

from .model import (
    BallRegion,
    BoxRegion,
    BumpField,
    ConstantPotential,
    CustomField,
    CustomPotential,
    EnergyEstimate,
    GaussianField,
    IndicatorField,
    LimitFit,
    OscillatoryPotential,
    Params,
    PlaneWaveField,
    RotationalPotential,
    ZeroPotential,
    eval_field,
    eval_potential,
    field_lp_norm_p,
    magnetic_gradient,
    zero_field,
)
from .quad import EngineSpec, energy, energy_det, energy_mc, energy_split, split_total

__version__ = "0.1.0"
