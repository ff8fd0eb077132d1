"""Macroscopic quantum jumps of two laser-driven atoms in a leaky cavity.

Quantum-jump trajectories for a four-level toy model and for the two-atom
cavity system (full and adiabatically eliminated), light/dark segmentation of
click records, and closed-form two-state Markov predictions.
"""
from .estimators import MarkovFidelityEstimator, TelegraphSegmenter
from .evolve import integrate_master, no_click_evolution, steady_state
from .markov import (RateSet, asymptotic_fidelity, cavity_timescales, fidelity_curve,
                     markov_oracle, no_click_probabilities, rates, toy_timescales)
from .models import (ModelParams, ToyParams, build_effective, build_full, build_toy, preset,
                     to_bell_basis)
from .telegraph import (conditional_fidelity, period_stats, segment_periods,
                        survival_probability)
from .trajectory import DetectionPolicy, TrajectoryRecord, run_ensemble, run_trajectory

__version__ = "0.1.0"

__all__ = [
    "MarkovFidelityEstimator", "TelegraphSegmenter", "integrate_master", "no_click_evolution",
    "steady_state", "RateSet", "asymptotic_fidelity", "cavity_timescales", "fidelity_curve",
    "markov_oracle", "no_click_probabilities", "rates", "toy_timescales", "ModelParams",
    "ToyParams", "build_effective", "build_full", "build_toy", "preset", "to_bell_basis",
    "conditional_fidelity", "period_stats", "segment_periods", "survival_probability",
    "DetectionPolicy", "TrajectoryRecord", "run_ensemble", "run_trajectory",
]
