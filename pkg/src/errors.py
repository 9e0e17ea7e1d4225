"""
Exception hierarchy; every error the CLI can report carries its exit code
"""


class JaffNetError(Exception):
    exit_code = 1


class ConfigError(JaffNetError, ValueError):
    exit_code = 2


class DataError(JaffNetError):
    exit_code = 3


class EmptyDatasetError(DataError):
    pass


class UnpairedFileError(DataError):
    def __init__(self, filename: str, missing_from: str):
        super().__init__(f"'{filename}' has no counterpart in {missing_from}")
        self.filename = filename


class OutputDirError(DataError):
    pass


class CheckpointError(JaffNetError):
    exit_code = 4


class ManifestError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    def __init__(self, tensor: str, reason: str):
        super().__init__(f"tensor '{tensor}': {reason}")
        self.tensor = tensor


class ShapeMismatchError(CheckpointError):
    def __init__(self, tensor: str, expected, found):
        super().__init__(f"tensor '{tensor}': model expects shape {list(expected)}, checkpoint has {list(found)}")
        self.tensor = tensor


class ConfigMismatchError(CheckpointError):
    def __init__(self, fields: dict):
        listing = ", ".join(f"{k} (config={a!r}, checkpoint={b!r})" for k, (a, b) in fields.items())
        super().__init__(f"checkpoint/config mismatch: {listing}")
        self.fields = fields


class ShapeError(JaffNetError, ValueError):
    exit_code = 5


class DegenerateMaskError(JaffNetError, ValueError):
    """Ground truth without foreground; curve-based metrics are undefined"""
