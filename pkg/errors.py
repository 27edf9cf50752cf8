"""Exceptions raised by resrec.

Every error carries a short machine-parseable ``code``; the CLI prints it as
``error <CODE>: <message>`` on a single line.
"""


class ResRecError(RuntimeError):
    code = "RESREC_ERROR"

    def __init__(self, message: str, *, code: "str|None" = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code

    def oneLine(self) -> str:
        message = " ".join(str(self).split())
        return f"error {self.code}: {message}"


class DatasetError(ResRecError):
    code = "DATASET_INVALID"


class CsvFormatError(DatasetError):
    code = "CSV_FORMAT"


class InfeasibleResampling(ResRecError):
    code = "INFEASIBLE_RESAMPLING"


class LearnerError(ResRecError):
    code = "LEARNER_INVALID"


class MetaFeatureError(ResRecError):
    code = "METAFEATURE_FAILED"


class ConfigError(ResRecError):
    code = "CONFIG_INVALID"


class ArtifactError(ResRecError):
    code = "ARTIFACT_MISSING"


class HashMismatchError(ArtifactError):
    code = "HASH_MISMATCH"


class BankTooSmallError(ResRecError):
    code = "BANK_TOO_SMALL"
