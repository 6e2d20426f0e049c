"""Stable derivation of per-stage seeds from one master seed."""

import hashlib


def derive_seed(master: int, *labels) -> int:
    """Child seed for the stage named by ``labels``.

    The mapping is a hash, so it does not depend on Python's per-process
    string hashing and is identical across runs and machines.
    """
    text = "/".join([str(int(master))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1
