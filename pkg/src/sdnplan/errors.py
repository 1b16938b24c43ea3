"""Exception types. Each carries the CLI exit code used when it escapes a subcommand."""


class PlannerError(Exception):
    exit_code = 1


class MalformedInput(PlannerError):
    exit_code = 10


class MissingCoordinates(PlannerError):
    exit_code = 11


class EmptyTopology(PlannerError):
    exit_code = 12


class AllFlowsZero(PlannerError):
    exit_code = 13


class IndexOutOfRange(PlannerError):
    exit_code = 14


class InfeasiblePlan(PlannerError):
    exit_code = 15


class InvalidFormulation(PlannerError):
    exit_code = 16


class NumericalBreakdown(PlannerError):
    exit_code = 17


class TooLarge(PlannerError):
    exit_code = 18


class InvalidPartitionData(PlannerError):
    exit_code = 19


class PreconditionViolated(PlannerError):
    exit_code = 20


class ValidationFailure(PlannerError):
    exit_code = 21

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)
