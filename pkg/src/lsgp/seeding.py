"""Deterministic seed derivation.

Every randomized stage derives its seed from the root seed plus a label
path (stage name, cut index, restart index, ...), so adding a new stage
never perturbs the seeds of existing ones.
"""

import hashlib


def derive_seed(root, *labels):
    """Map (root_seed, label path) to a stable 63-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big") >> 1
