"""Exception types mapped to CLI exit codes."""


class QCError(Exception):
    exit_code = 1


class ConfigError(QCError, ValueError):
    exit_code = 2


class DataError(QCError, ValueError):
    exit_code = 3


class NumericalError(QCError, ArithmeticError):
    exit_code = 4
