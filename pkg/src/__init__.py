"""chainlint - consensus-critical static analysis for Cosmos-SDK appchains."""

__version__ = "0.1.0"
