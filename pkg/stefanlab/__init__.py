"""Simulation and verification lab for boundary control of the one-phase Stefan problem."""

from stefanlab.params import ZINC, ConfigurationError, PhysicalParams, ScenarioConfig

__all__ = ["ZINC", "ConfigurationError", "PhysicalParams", "ScenarioConfig"]
