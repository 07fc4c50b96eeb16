from typing import Optional


class MichsError(Exception):
    """Base class for all errors raised by the package"""


class ConfigError(MichsError, ValueError):
    """Invalid configuration value or violated precondition on user input"""

    def __init__(self, message: str, problems: Optional[list] = None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class DimensionError(MichsError, ValueError):
    """Shapes of the inputs do not agree"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DatasetError(MichsError):
    """Dataset files or directories cannot be used"""


class ContractError(MichsError, AssertionError):
    """An internal contract between modules was broken"""
