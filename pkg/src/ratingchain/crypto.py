"""Key generation, address derivation, signing, and hashing.

Ed25519 signatures (deterministic, 32-byte public keys, 64-byte signatures)
and SHA-256 for every digest in the system. Addresses are the trailing 20
bytes of the SHA-256 of the public key, displayed as 0x-prefixed lowercase
hex.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

SEED_LEN = 32
PUBKEY_LEN = 32
SIGNATURE_LEN = 64
ADDRESS_LEN = 20
DIGEST_LEN = 32


class CryptoError(ValueError):
    """Malformed key, signature, or encoding."""


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes  # 32-byte Ed25519 seed
    public_key: bytes  # 32 bytes

    @property
    def address(self) -> bytes:
        return derive_address(self.public_key)


def generate_keypair(seed: bytes) -> KeyPair:
    """Deterministically derive an Ed25519 keypair from a 32-byte seed."""
    if len(seed) != SEED_LEN:
        raise CryptoError(f"seed must be {SEED_LEN} bytes, got {len(seed)}")
    priv = Ed25519PrivateKey.from_private_bytes(seed)
    return KeyPair(secret_key=seed, public_key=priv.public_key().public_bytes_raw())


def derive_address(public_key: bytes) -> bytes:
    """Address = last 20 bytes of SHA-256(public_key)."""
    if len(public_key) != PUBKEY_LEN:
        raise CryptoError(f"public key must be {PUBKEY_LEN} bytes")
    return hash32(public_key)[-ADDRESS_LEN:]


def sign(secret_key: bytes, message: bytes) -> bytes:
    if len(secret_key) != SEED_LEN:
        raise CryptoError(f"secret key must be {SEED_LEN} bytes")
    return Ed25519PrivateKey.from_private_bytes(secret_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(public_key) != PUBKEY_LEN:
        raise CryptoError(f"public key must be {PUBKEY_LEN} bytes")
    if len(signature) != SIGNATURE_LEN:
        raise CryptoError(f"signature must be {SIGNATURE_LEN} bytes")
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except InvalidSignature:
        return False


def hash32(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def address_to_hex(addr: bytes) -> str:
    if len(addr) != ADDRESS_LEN:
        raise CryptoError(f"address must be {ADDRESS_LEN} bytes")
    return "0x" + addr.hex()


def digest_to_hex(digest: bytes) -> str:
    if len(digest) != DIGEST_LEN:
        raise CryptoError(f"digest must be {DIGEST_LEN} bytes")
    return "0x" + digest.hex()


def address_from_hex(s: str) -> bytes:
    """Parse a 0x-prefixed 40-hex-char address; case-insensitive."""
    return _bytes_from_hex(s, ADDRESS_LEN, strict_case=False)


def digest_from_hex(s: str, strict: bool = False) -> bytes:
    return _bytes_from_hex(s, DIGEST_LEN, strict_case=strict)


def bytes_from_hex(s: str, expected_len: int | None = None, strict_case: bool = False) -> bytes:
    return _bytes_from_hex(s, expected_len, strict_case=strict_case)


def _bytes_from_hex(s: str, expected_len: int | None, strict_case: bool) -> bytes:
    if not isinstance(s, str) or not s.startswith("0x"):
        raise CryptoError(f"expected 0x-prefixed hex string, got {s!r}")
    body = s[2:]
    if strict_case and body.lower() != body:
        raise CryptoError(f"hex string must be lowercase: {s!r}")
    try:
        raw = bytes.fromhex(body)
    except ValueError as exc:
        raise CryptoError(f"invalid hex string {s!r}") from exc
    if expected_len is not None and len(raw) != expected_len:
        raise CryptoError(f"expected {expected_len} bytes, got {len(raw)}")
    return raw
