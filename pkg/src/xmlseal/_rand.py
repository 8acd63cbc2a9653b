"""Randomness source, seedable through the XMLSEAL_SEED environment variable.

With the variable unset every draw comes from the operating system CSPRNG.
When it is set, draws come from a deterministic stream so test fixtures
reproduce bit-exactly; that mode is insecure and exists only for tests.
RSA key generation happens inside the crypto backend and is never
affected by the seed.
"""

import os
import random
import secrets

_seeded: tuple[str, random.Random] | None = None


def rand_bytes(n: int) -> bytes:
    seed = os.environ.get("XMLSEAL_SEED")
    if seed is None:
        return secrets.token_bytes(n)
    global _seeded
    if _seeded is None or _seeded[0] != seed:
        _seeded = (seed, random.Random(seed))
    return _seeded[1].randbytes(n)


def rand_hex(n_bytes: int) -> str:
    return rand_bytes(n_bytes).hex()
