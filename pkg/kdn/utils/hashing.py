"""
Content hashes for model artifacts and seed derivation.
"""
import hashlib
from pathlib import Path


def file_sha256(path: Path) -> str:
    """
    Hex SHA-256 digest of a file's bytes.

    Args:
        path: File to hash

    Returns:
        64-character hex digest
    """
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def derive_seed(*components) -> int:
    """
    Derive a reproducible 64-bit seed from an ordered list of components.

    The seed is identified by:
    - the run seed
    - any stream labels (fold index, purpose string)

    Returns:
        Non-negative integer below 2**64
    """
    # Normalize inputs
    composite = "|".join(str(c).strip().lower() for c in components)

    hash_bytes = hashlib.sha256(composite.encode('utf-8')).digest()

    # First 8 bytes, big-endian
    return int.from_bytes(hash_bytes[:8], 'big')
