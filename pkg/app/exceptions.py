# app/exceptions.py
"""
Defines custom, toolkit-specific exceptions for clear error handling.

Callers (mostly the CLI) map these onto exit codes: configuration problems
exit with 2, exhausted budgets with 3, everything else with 1.
"""


class SimulationError(Exception):
    """Base exception for all errors raised by the toolkit."""
    pass

# --- Configuration Exceptions ---
class ConfigError(SimulationError):
    """Raised when an experiment config or family/goal spec fails validation."""
    pass

# --- Distribution Exceptions ---
class DistributionError(SimulationError):
    """Raised for malformed primitive distributions, laws or families."""
    pass

class DomainError(DistributionError):
    """Raised when a PGF is evaluated outside [0, 1]."""
    pass

class DegenerateMeanError(DistributionError):
    """Raised when a stage offspring mean is zero where a positive mean is required."""
    pass

# --- Tree Exceptions ---
class TreeError(SimulationError):
    """Base exception for decision tree access and parsing."""
    pass

class UnknownNodeError(TreeError):
    """Raised when a node path is not part of the tree."""
    pass

class TreeFormatError(TreeError):
    """Raised when a serialized tree cannot be parsed."""
    pass

# --- Strategy Exceptions ---
class StrategyError(SimulationError):
    """Base exception for strategy misuse."""
    pass

class IllegalActionError(StrategyError):
    """Raised when a chosen action is not in the current action set."""
    pass

# --- Budget Exceptions ---
class BudgetExceededError(SimulationError):
    """Base exception for runs that hit a configured size limit."""
    pass

class NodeBudgetExceededError(BudgetExceededError):
    """Raised when a sampled tree or revealed cone exceeds the node budget."""
    pass

class PopulationBudgetExceededError(BudgetExceededError):
    """Raised when a branching process population exceeds its budget."""
    pass

class EnumerationBudgetError(BudgetExceededError):
    """Raised when exact MDP enumeration would exceed its caps."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

# --- Local Services Exceptions ---
class ReportError(SimulationError):
    """Raised for errors while writing or reading report files."""
    pass
