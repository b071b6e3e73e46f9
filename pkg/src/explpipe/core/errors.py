"""Shared exception types for corpus handling and persistence."""


class CorpusError(Exception):
    """Base class for ingestion and persistence failures."""


class ParseError(CorpusError):
    """A file line could not be parsed; carries the 1-based line number."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class InvariantError(CorpusError):
    """A record violates a domain invariant; names the offending entity id."""

    def __init__(self, entity_id: str, message: str):
        super().__init__(f"{entity_id}: {message}")
        self.entity_id = entity_id


class DuplicateIdError(CorpusError):
    def __init__(self, entity_id: str):
        super().__init__(f"duplicate id: {entity_id}")
        self.entity_id = entity_id


class SchemaVersionError(CorpusError):
    def __init__(self, path: str, found, expected: int):
        super().__init__(f"{path}: schema_version {found!r}, expected {expected}")
        self.found = found
        self.expected = expected
