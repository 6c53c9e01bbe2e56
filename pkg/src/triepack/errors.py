class TriePackError(Exception):
    pass


class ParseError(TriePackError, ValueError):
    """Malformed input record. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class StructureError(ParseError):
    """Parent links do not form a tree rooted at message 0."""


class InfeasibleError(TriePackError):
    def __init__(self, message: str, traj_id: str | None = None):
        self.traj_id = traj_id
        super().__init__(message)


class SizeError(TriePackError, ValueError):
    pass
