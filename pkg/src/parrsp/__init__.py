"""Two-party protocol simulator for classically-instructed parallel remote
preparation of BB84 states, with rigidity diagnostics and the cryptographic
schemes built on top of the primitive (unclonable encryption, copy-protection
of point functions, computing on encrypted data).

Nothing in this package is computationally secure: the function-pair backend
is a keyed permutation whose key doubles as the trapdoor.  The simulator is
for exact desk-scale verification of protocol behavior, not deployment.
"""

from .protocol import (
    MultiRoundConfig,
    ProtocolAbort,
    ProtocolResult,
    TestRoundRecord,
    run_multi_round,
    run_prep_round,
    run_test_round,
)
from .provers import HonestProver, cheating_prover

__version__ = "0.1.0"

__all__ = [
    "MultiRoundConfig",
    "ProtocolAbort",
    "ProtocolResult",
    "TestRoundRecord",
    "run_multi_round",
    "run_prep_round",
    "run_test_round",
    "HonestProver",
    "cheating_prover",
    "__version__",
]
