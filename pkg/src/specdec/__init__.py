"""Two-party secure speculative decoding.

A client drafts tokens with a public model; a server-held private model
verifies them inside a secret-shared protocol built from oblivious transfer
and a secure sign test, so the client learns only the accepted prefix and
the distribution it needs to close the step.
"""

from .compare import CHUNKED, IDEAL, CompareBackend, f_less
from .models import NgramModel, SoftmaxModel, ngram_fit
from .ot import OtInstance, ot_batch, ot_choose, ot_cost_bits
from .parties import PartyRngs
from .protocol import (
    SharedDistributions,
    decode_step,
    draft_tokens,
    finalize_token,
    naive_verify,
    run_step,
    secure_forward_stub,
    secure_verify,
)
from .ring import DEFAULT_CFG, FixedPointConfig, RingValue, SharedVector
from .sampling import DraftBatch, VerifyOutcome, speculative_step_plaintext
from .transport import LAN, WAN, Channel, CostLedger, NetworkModel

__all__ = [
    "CHUNKED", "IDEAL", "CompareBackend", "f_less",
    "NgramModel", "SoftmaxModel", "ngram_fit",
    "OtInstance", "ot_batch", "ot_choose", "ot_cost_bits",
    "PartyRngs",
    "SharedDistributions", "decode_step", "draft_tokens", "finalize_token", "naive_verify",
    "run_step", "secure_forward_stub", "secure_verify",
    "DEFAULT_CFG", "FixedPointConfig", "RingValue", "SharedVector",
    "DraftBatch", "VerifyOutcome", "speculative_step_plaintext",
    "LAN", "WAN", "Channel", "CostLedger", "NetworkModel",
]

__version__ = "0.1.0"
