"""
Validation rules shared by the domain types and the run configuration.

Every rule returns an ``(is_valid, message)`` tuple so callers can either
collect messages (config validation) or raise on the first one (``require``).
"""

from typing import Any, Callable, Iterable, List, Tuple

from shared.exceptions import ConfigError

Rule = Callable[[Any], Tuple[bool, str]]


class Validator:
    """Validation rules and helpers"""

    @staticmethod
    def positive(value: Any) -> tuple:
        """Strictly positive number validator"""
        try:
            num = float(value)
            if not num > 0:
                return False, "Must be a positive number"
            return True, ""
        except (ValueError, TypeError):
            return False, "Must be a number"

    @staticmethod
    def non_negative(value: Any) -> tuple:
        """Non-negative number validator"""
        try:
            num = float(value)
            if not num >= 0:
                return False, "Must be zero or greater"
            return True, ""
        except (ValueError, TypeError):
            return False, "Must be a number"

    @staticmethod
    def open_unit_interval(value: Any) -> tuple:
        """Probability strictly inside (0, 1)"""
        try:
            num = float(value)
            if not 0.0 < num < 1.0:
                return False, "Must lie strictly between 0 and 1"
            return True, ""
        except (ValueError, TypeError):
            return False, "Must be a number"

    @staticmethod
    def half_open_unit_interval(value: Any) -> tuple:
        """Number in [0, 1)"""
        try:
            num = float(value)
            if not 0.0 <= num < 1.0:
                return False, "Must lie in [0, 1)"
            return True, ""
        except (ValueError, TypeError):
            return False, "Must be a number"

    @staticmethod
    def at_least(minimum: int) -> Callable:
        """Integer lower-bound validator"""
        def validate(value: Any) -> tuple:
            try:
                num = int(value)
            except (ValueError, TypeError):
                return False, "Must be an integer"
            if num != value and not isinstance(value, str):
                return False, "Must be an integer"
            if num < minimum:
                return False, f"Must be at least {minimum}"
            return True, ""
        return validate

    @staticmethod
    def worker_count(value: Any) -> tuple:
        """Worker processes: a positive integer, or -1 for every core"""
        if value == -1 and not isinstance(value, bool):
            return True, ""
        return Validator.at_least(1)(value)

    @staticmethod
    def choice(options: Iterable[str]) -> Callable:
        """Membership validator"""
        allowed = tuple(options)

        def validate(value: Any) -> tuple:
            if value not in allowed:
                return False, f"Must be one of {', '.join(allowed)}"
            return True, ""
        return validate

    @staticmethod
    def non_empty(value: Any) -> tuple:
        """Non-empty sequence validator"""
        try:
            if len(value) == 0:
                return False, "Must not be empty"
        except TypeError:
            return False, "Must be a sequence"
        return True, ""


def check(name: str, value: Any, *rules: Rule) -> List[str]:
    """Run rules against a named value and return prefixed messages"""
    problems = []
    for rule in rules:
        is_valid, message = rule(value)
        if not is_valid:
            problems.append(f"{name}: {message} (got {value!r})")
            break
    return problems


def require(name: str, value: Any, *rules: Rule) -> None:
    """Raise ConfigError on the first failing rule"""
    problems = check(name, value, *rules)
    if problems:
        raise ConfigError(problems[0])
