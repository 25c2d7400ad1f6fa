"""Exception hierarchy shared by every module."""


class IrfsError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(IrfsError):
    """The annotation input is unusable."""


class MalformedJson(DatasetError):
    def __init__(self, path, msg, line=None, column=None, offset=None):
        self.path = str(path)
        self.line = line
        self.column = column
        self.offset = offset
        if line is not None:
            where = f"line {line} column {column} (char {offset})"
        else:
            where = f"near byte offset {offset}"
        super().__init__(f"{self.path}: malformed JSON at {where}: {msg}")


class SchemaViolation(DatasetError):
    pass


class DuplicateId(DatasetError):
    def __init__(self, kind, record_id):
        self.kind = kind
        self.record_id = record_id
        super().__init__(f"duplicate {kind} id {record_id}")


class DanglingReference(DatasetError):
    def __init__(self, annotation_id, field, target):
        self.annotation_id = annotation_id
        self.field = field
        self.target = target
        super().__init__(
            f"annotation {annotation_id} references missing {field} {target}"
        )


class EmptyDataset(IrfsError):
    pass


class ProvenanceMismatch(IrfsError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"source digest mismatch: expected {expected}, got {got}")


class InfeasibleSpec(IrfsError):
    pass
