"""Per-component random streams derived from one experiment seed."""
import zlib

import numpy as np


def derive_rng(seed: int, component: str) -> np.random.Generator:
    """Independent generator for ``component``; adding components never shifts others."""
    return np.random.default_rng([int(seed), zlib.crc32(component.encode())])
