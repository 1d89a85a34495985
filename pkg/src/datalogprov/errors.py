"""Exception hierarchy.

Every error raised for bad user input derives from ``ProvError`` so the CLI
can map it to exit status 1.
"""


class ProvError(Exception):
    """Base class for user-facing errors."""


class ProgramSyntaxError(ProvError):
    def __init__(self, message, line=None, col=None, token=None):
        self.line, self.col, self.token = line, col, token
        where = f"{line}:{col}: " if line is not None else ""
        tok = f" (at {token!r})" if token is not None else ""
        super().__init__(f"{where}{message}{tok}")


class UnsafeRule(ProvError):
    def __init__(self, rule_id, variable):
        self.rule_id, self.variable = rule_id, variable
        super().__init__(f"rule {rule_id}: variable {variable} does not occur in a positive goal")


class RecursionDetected(ProvError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("recursive predicates: " + " -> ".join(self.cycle))


class ArityMismatch(ProvError):
    pass


class DuplicateRuleId(ProvError):
    pass


class MissingRelation(ProvError):
    pass


class DomainTooLarge(ProvError):
    pass


class ConstantOutsideDomain(ProvError):
    def __init__(self, attribute, constant):
        self.attribute, self.constant = attribute, constant
        super().__init__(f"constant {constant!r} is outside dom({attribute})")


class NotUndetermined(ProvError):
    pass


class NegationNotSupported(ProvError):
    pass


class NegationPresent(ProvError):
    pass


class MissingAnnotation(ProvError):
    pass


class UndeterminedStatusPresent(ProvError):
    pass


class MalformedGame(ProvError):
    pass


class IllegalInterpretation(ProvError):
    pass


class NotTranslatedProgram(ProvError):
    pass


class VariableCoverageMismatch(ProvError):
    pass


class PathConditionViolated(ProvError):
    pass


class InvalidDTree(ProvError):
    pass
