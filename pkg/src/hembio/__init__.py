"""Biometric authentication over gate-bootstrapped homomorphic encryption."""

from .config import Config
from .gates import EncBit, KeyTriple, keygen
from .matcher import BiometricVector, EncVector, MatchConfig
from .protocol import Client, ClientIdentity, IdToken, Server, Termination, Verdict, run_protocol

__version__ = "0.1.0"

__all__ = [
    "BiometricVector",
    "Client",
    "ClientIdentity",
    "Config",
    "EncBit",
    "EncVector",
    "IdToken",
    "KeyTriple",
    "MatchConfig",
    "Server",
    "Termination",
    "Verdict",
    "keygen",
    "run_protocol",
]
