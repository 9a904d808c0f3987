# app/models/__init__.py
"""
Models package.

This package contains the DTOs exchanged between modules and the MDP state
value type.
"""

from .dto import (
    # Core DTOs
    Estimate,
    Episode,
    ShiftValueSequence,
    CheckResult,
    ExperimentConfig,

    # Type aliases
    StateDigest,
    OutputFormat,
    CheckName,
    SCHEMA_VERSION,
)
from .state import MdpState, RevealedState

__all__ = [
    # Core DTOs
    'Estimate',
    'Episode',
    'ShiftValueSequence',
    'CheckResult',
    'ExperimentConfig',
    'MdpState',
    'RevealedState',

    # Type aliases
    'StateDigest',
    'OutputFormat',
    'CheckName',
    'SCHEMA_VERSION',
]
