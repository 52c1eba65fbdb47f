"""Exception types shared across the pipeline."""


class ParseError(ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None, path: str | None = None):
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_no is not None:
            where += f"{line_no}:"
        super().__init__(f"{where} {message}" if where else message)


class ConsistencyError(RuntimeError):
    """Artifacts disagree (e.g. a checkpoint trained on a different vocabulary)."""
