"""Hardness of maximum independent set on unit-disk lattices: exact counting,
simulated annealing, Rydberg-array simulation and the analysis tying them together."""

__version__ = "0.1.0"

from .counting import hardness_metrics, independence_polynomial, mis_size
from .graph import PhysicalParams, UnitDiskGraph, generate_instance, load_instance, save_instance

__all__ = [
    "PhysicalParams", "UnitDiskGraph", "generate_instance", "hardness_metrics", "independence_polynomial",
    "load_instance", "mis_size", "save_instance",
]
