"""Privacy-preserving spectrum sharing: anonymous credentials, location
proofs, puzzle-gated service access, and a deterministic attack simulator."""

__version__ = "0.1.0"
