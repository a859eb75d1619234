"""Exception taxonomy shared across the package."""


class QtriError(Exception):
    """Base class for errors raised by this package."""


class SizeLimitError(QtriError):
    """An operation would exceed the supported problem size (8 qubits / dim 256)."""


class NumericalFailureError(QtriError):
    """A numerical routine failed to produce a usable result."""


class PositivityError(NumericalFailureError):
    """An operator required to be positive semidefinite is materially negative."""


class ConfigurationError(QtriError, ValueError):
    """Invalid configuration or argument combination."""


class ChannelError(QtriError):
    """Base class for wire-protocol failures."""


class TruncationError(ChannelError):
    """The byte stream ended mid-frame."""


class FrameSizeError(ChannelError):
    """A frame's declared or actual payload exceeds the 1 MiB cap."""


class FrameParseError(ChannelError):
    """A frame payload is not valid JSON or violates the message schema."""


class UnknownMessageError(ChannelError):
    """A frame decoded cleanly but carries an unrecognized message type."""

    def __init__(self, type_name: str):
        super().__init__(f"unknown message type {type_name!r}")
        self.type_name = type_name


class SessionError(ChannelError):
    """Session-level protocol violation (bad sequence, unexpected message)."""

    def __init__(self, code: int, detail: str):
        super().__init__(f"protocol error {code}: {detail}")
        self.code = code
        self.detail = detail
