"""Perfect sampling for finite Markov chains by dominated coupling from the past."""

from ._core import *  # noqa: F401,F403
from ._core import (
    Error,
    certify,
    minorization_for,
    perfect_sample,
    run_command,
    sample_batch,
)

__all__ = [name for name in dir() if not name.startswith("_")]
