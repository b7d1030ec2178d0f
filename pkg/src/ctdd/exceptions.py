from typing import Optional


class CtddException(Exception):
    pass


class DimensionMismatch(CtddException):
    pass


class InsufficientDerivativeOrder(CtddException):
    pass


class NotPersistentlyExciting(CtddException):
    """
    Raised when the excitation certificate of the input fails.

    Args:
        message (str): Human readable reason.
        certificate (PeCertificate, optional): The failed certificate.
    """

    def __init__(self, message: str, certificate: Optional[object] = None):
        super().__init__(message)
        self.certificate = certificate


class RankMismatch(CtddException):
    pass


class RankDeficient(CtddException):
    pass


class RiccatiBlowUp(CtddException):
    pass


class ConfigError(CtddException):
    pass


class StageFailed(CtddException):
    """
    Raised by the workbench when a pipeline stage fails.

    Args:
        stage (str): Stage name, e.g. `identify`.
        message (str): Reason.
    """

    def __init__(self, stage: str, message: str):
        super().__init__(f'[{stage}] {message}')
        self.stage = stage
