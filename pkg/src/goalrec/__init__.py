"""Goal recognition from learned goal-conditioned policies.

The recognizer compares observed (state, action) pairs with one trained
policy per candidate goal and turns the per-goal distances into a
softmin posterior.
"""
from .core import (
    Box, Categorical, DiagGaussian, Discrete, DivergenceError, GoalPolicy, GoalRecError, GoalSpec, GRProblem,
    ObservationSequence, ObservationStep, RecognitionResult, confidence, rank_goals, softmin_posterior,
)
from .envs import GridWorld, GridWorldSpec, PointReach, PointReachSpec, make_env
from .recognize import MetricConfig, MetricKind, recognize

__version__ = "0.1.0"
