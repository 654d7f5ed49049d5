import numpy as np


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from integer keys (numpy SeedSequence hash)."""
    state = np.random.SeedSequence([int(key) & 0xFFFFFFFFFFFFFFFF for key in keys])
    return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
