"""
Exception hierarchy for the group-anonymity toolkit.

Every error is a ValueError, the type the strategy loader raises for bad plugin
files. Each class carries the CLI exit code it maps to:
1 for configuration problems, 2 for data problems, 3 for targets that cannot
be realized by redistribution.
"""


class GroupAnonymityError(ValueError):
    exit_code = 2


# Configuration family

class ConfigError(GroupAnonymityError):
    exit_code = 1


class InvalidGroupSpec(ConfigError):
    pass


class UnsupportedFilter(ConfigError):
    pass


class LevelTooDeep(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class EmptyTargets(ConfigError):
    pass


class InvalidTargets(ConfigError):
    pass


class StrategyLoadError(ConfigError):
    pass


# Data family

class SignalTooShort(GroupAnonymityError):
    pass


class OddLengthUnsupported(GroupAnonymityError):
    pass


class DimensionMismatch(GroupAnonymityError):
    pass


class UnknownAttribute(GroupAnonymityError):
    pass


class UnknownParameterValue(GroupAnonymityError):
    pass


class DivisorZero(GroupAnonymityError):
    pass


class LabelMismatch(GroupAnonymityError):
    pass


class OffsetTooSmall(GroupAnonymityError):
    pass


class NonPositiveSum(GroupAnonymityError):
    pass


class NegativeConcentration(GroupAnonymityError):
    pass


class MicrofileIOError(GroupAnonymityError):
    pass


class MalformedRow(GroupAnonymityError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateAttribute(GroupAnonymityError):
    pass


class SchemaMismatch(GroupAnonymityError):
    pass


class StalePlan(GroupAnonymityError):
    pass


# Infeasible family

class InfeasibleTarget(GroupAnonymityError):
    exit_code = 3

    def __init__(self, message, bucket=None):
        self.bucket = bucket
        super().__init__(message)


class NegativeTarget(GroupAnonymityError):
    exit_code = 3
