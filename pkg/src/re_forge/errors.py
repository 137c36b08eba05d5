"""Exception hierarchy.

Every validation failure derives from :class:`ReForgeError`, which the CLI
maps to exit code 1.  I/O problems stay as plain ``OSError`` (exit code 2).
"""


class ReForgeError(ValueError):
    """Base class for all data and contract violations."""


class MalformedLine(ReForgeError):
    def __init__(self, lineno, reason, line=None):
        self.lineno = lineno
        self.reason = reason
        self.line = line
        msg = f"line {lineno}: {reason}"
        if line is not None:
            msg += f" ({line!r})"
        super().__init__(msg)


class SpanMismatch(ReForgeError):
    pass


class DanglingReference(ReForgeError):
    pass


class ArgumentRoleError(ReForgeError):
    """A relation argument resolves to an entity of the wrong type."""


class DuplicateId(ReForgeError):
    pass


class DuplicateRelation(ReForgeError):
    pass


class UnknownDocId(ReForgeError):
    pass


class MalformedRow(ReForgeError):
    pass


class UnknownLabel(ReForgeError):
    pass


class SchemaViolation(ReForgeError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class EntityTextMismatch(ReForgeError):
    pass


class UnresolvedConflict(ReForgeError):
    def __init__(self, conflicts):
        self.conflicts = list(conflicts)
        keys = ", ".join(c.describe() for c in self.conflicts[:10])
        more = "" if len(self.conflicts) <= 10 else f" (+{len(self.conflicts) - 10} more)"
        super().__init__(f"{len(self.conflicts)} unresolved relation conflict(s): {keys}{more}")


class SplitMismatch(ReForgeError):
    pass


class OverlappingEntities(ReForgeError):
    pass


class ZeroCooccurrence(ReForgeError):
    pass


class DimensionMismatch(ReForgeError):
    pass


class InvalidStep(ReForgeError):
    pass


class LengthMismatch(ReForgeError):
    pass


class InvalidDistribution(ReForgeError):
    pass


class EmptyInput(ReForgeError):
    pass


class ConfigError(ReForgeError):
    pass
