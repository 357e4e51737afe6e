"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto stable, structured process exit statuses.
"""


class InterpNNError(Exception):
    exit_code = 1


class DatasetError(InterpNNError, ValueError):
    exit_code = 3


class InvalidDatasetError(DatasetError):
    """Raised when a dataset violates one or more invariants.

    The full :class:`~interpnn.core.ValidationReport` is attached as
    ``report``.
    """

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class EmptyDatasetError(DatasetError):
    pass


class NonBinaryLabelError(DatasetError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class CsvParseError(DatasetError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DegenerateSplitError(DatasetError):
    pass


class KTooLargeError(InterpNNError, ValueError):
    exit_code = 4


class EmptyQuerySetError(InterpNNError, ValueError):
    exit_code = 4


class TaskMismatchError(InterpNNError, ValueError):
    exit_code = 4


class SchemeMismatchError(InterpNNError, ValueError):
    exit_code = 4


class EmptyGridError(InterpNNError, ValueError):
    exit_code = 4


class OutOfRegimeError(InterpNNError, ValueError):
    """Requested a theory value outside ``0 <= gamma < d/3`` (or ``d/2``)."""

    exit_code = 4


class ConfigInvalidError(InterpNNError, ValueError):
    exit_code = 4


class OutputError(InterpNNError, OSError):
    exit_code = 5
