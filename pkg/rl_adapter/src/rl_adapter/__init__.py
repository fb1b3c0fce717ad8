from rl_adapter.client import (
    PROTOCOL_VERSION,
    ProtocolError,
    RemoteEnv,
    RemoteError,
    VectorEnv,
    connect,
)

__all__ = [
    "PROTOCOL_VERSION",
    "ProtocolError",
    "RemoteEnv",
    "RemoteError",
    "VectorEnv",
    "connect",
]

__version__ = "0.1.0"
