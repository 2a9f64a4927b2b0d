from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PartyRngs:
    """Independent generators for the client, the server and the ideal
    functionalities (dealer), all derived from one seed."""

    client: np.random.Generator
    server: np.random.Generator
    dealer: np.random.Generator

    @classmethod
    def from_seed(cls, seed) -> PartyRngs:
        if isinstance(seed, PartyRngs):
            return seed
        if isinstance(seed, np.random.Generator):
            children = seed.spawn(3)
        else:
            children = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
        return cls(*children)
