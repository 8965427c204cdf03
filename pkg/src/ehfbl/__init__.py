"""Finite-blocklength achievable rates for energy-harvesting channels under save-and-transmit."""
from .core import (AwgnEhConfig, BudgetError, DmcSpec, EnergyProcess, SpecError, TrialOutcome,
                   make_energy_process, sample_arrivals)

__all__ = ["AwgnEhConfig", "BudgetError", "DmcSpec", "EnergyProcess", "SpecError",
           "TrialOutcome", "make_energy_process", "sample_arrivals"]
