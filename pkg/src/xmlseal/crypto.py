"""Cryptographic primitives and key management.

Everything here is byte-oriented; XML concerns live in the layers above.
RSA, AES and the hash constructions come from the ``cryptography``
package (hazmat layer) and ``hashlib``; this module pins the parameter
choices and maps library failures onto this package's error types.

Supported operations: SHA-256 digests (SHA-1 accepted for verification
of legacy material only), RSA PKCS#1 v1.5 signatures, AES-CBC with
PKCS#7 padding and a random prepended IV, and RSA-OAEP (SHA-256) key
wrap. MD5 is deliberately not constructible.
"""

from __future__ import annotations

import enum
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from cryptography.exceptions import InvalidSignature as _LibInvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding as asym_padding
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.padding import PKCS7

from ._rand import rand_bytes
from .errors import (
    BadKeyFile,
    KindMismatch,
    MalformedCiphertext,
    PaddingOrKeyError,
    UnknownKey,
    UnsupportedAlgorithm,
    UnwrapFailed,
    WrongKeyKind,
)

RSA_PRIVATE = "rsa-private"
RSA_PUBLIC = "rsa-public"
AES_KEY = "aes-key"

_RSA_BITS = (2048, 3072)
_AES_BITS = (128, 256)

IV_SIZE = 16
_BLOCK = 16


class DigestAlg(enum.Enum):
    """Digest algorithms this package will compute. There is no MD5."""

    SHA256 = "sha256"
    SHA1 = "sha1"

    @property
    def size(self) -> int:
        return hashlib.new(self.value).digest_size

    @property
    def verify_only(self) -> bool:
        return self is DigestAlg.SHA1


def digest(alg: DigestAlg, data: bytes) -> bytes:
    return hashlib.new(alg.value, data).digest()


_HASHES = {DigestAlg.SHA256: hashes.SHA256, DigestAlg.SHA1: hashes.SHA1}


@dataclass(frozen=True, repr=False)
class KeyMaterial:
    """A named key: RSA private, RSA public, or raw AES bytes.

    ``key`` is the underlying ``cryptography`` key object for RSA kinds
    and the raw bytes for AES. The repr never exposes key material.
    """

    name: str
    kind: str
    bits: int
    key: Union[rsa.RSAPrivateKey, rsa.RSAPublicKey, bytes]

    def __repr__(self) -> str:
        return f"KeyMaterial(name={self.name!r}, kind={self.kind!r}, bits={self.bits})"

    def public_counterpart(self) -> "KeyMaterial":
        """The public half of an RSA private key (same name)."""
        if self.kind == RSA_PUBLIC:
            return self
        if self.kind != RSA_PRIVATE:
            raise WrongKeyKind(f"key {self.name!r} of kind {self.kind} has no public half")
        return KeyMaterial(self.name, RSA_PUBLIC, self.bits, self.key.public_key())


def keygen(kind: str, bits: int, name: str) -> KeyMaterial:
    """Generate a fresh key.

    RSA generation always uses the library's own entropy source; the
    seedable generator covers only IVs, content keys and identifiers.
    """
    if kind == "rsa":
        if bits not in _RSA_BITS:
            raise UnsupportedAlgorithm(f"rsa size {bits}; choose one of {_RSA_BITS}")
        key = rsa.generate_private_key(public_exponent=65537, key_size=bits)
        return KeyMaterial(name, RSA_PRIVATE, bits, key)
    if kind == "aes":
        if bits not in _AES_BITS:
            raise UnsupportedAlgorithm(f"aes size {bits}; choose one of {_AES_BITS}")
        return KeyMaterial(name, AES_KEY, bits, rand_bytes(bits // 8))
    raise UnsupportedAlgorithm(f"unknown key kind {kind!r}; choose rsa or aes")


def rsa_public_numbers(key: KeyMaterial) -> tuple[int, int]:
    """(modulus, exponent) of an RSA key's public half."""
    pub = key.public_counterpart()
    numbers = pub.key.public_numbers()
    return numbers.n, numbers.e


def rsa_public_from_numbers(n: int, e: int, name: str = "embedded") -> KeyMaterial:
    try:
        key = rsa.RSAPublicNumbers(e, n).public_key()
    except ValueError as exc:
        raise BadKeyFile(f"invalid RSA public numbers: {exc}") from None
    return KeyMaterial(name, RSA_PUBLIC, key.key_size, key)


# ---------------------------------------------------------------------------
# signatures
# ---------------------------------------------------------------------------

def sign(key: KeyMaterial, alg: DigestAlg, data: bytes) -> bytes:
    """RSA PKCS#1 v1.5 signature over data. Signing is SHA-256 only."""
    if key.kind != RSA_PRIVATE:
        raise WrongKeyKind(f"signing needs an rsa-private key, not {key.kind}")
    if alg.verify_only:
        raise UnsupportedAlgorithm(f"{alg.value} is accepted for verification only")
    return key.key.sign(data, asym_padding.PKCS1v15(), _HASHES[alg]())


def verify(key: KeyMaterial, alg: DigestAlg, data: bytes, signature: bytes) -> bool:
    """True if signature checks out; never raises for a bad signature."""
    if key.kind == RSA_PRIVATE:
        key = key.public_counterpart()
    if key.kind != RSA_PUBLIC:
        raise WrongKeyKind(f"verification needs an rsa-public key, not {key.kind}")
    try:
        key.key.verify(signature, data, asym_padding.PKCS1v15(), _HASHES[alg]())
        return True
    except _LibInvalidSignature:
        return False


# ---------------------------------------------------------------------------
# symmetric encryption
# ---------------------------------------------------------------------------

def _require_aes(key: KeyMaterial, op: str) -> bytes:
    if key.kind != AES_KEY:
        raise WrongKeyKind(f"{op} needs an aes-key, not {key.kind}")
    return key.key


def sym_encrypt(key: KeyMaterial, plaintext: bytes) -> bytes:
    """AES-CBC/PKCS#7; returns a fresh random 16-byte IV + ciphertext."""
    raw = _require_aes(key, "symmetric encryption")
    iv = rand_bytes(IV_SIZE)
    padder = PKCS7(_BLOCK * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(raw), modes.CBC(iv)).encryptor()
    return iv + enc.update(padded) + enc.finalize()


def sym_decrypt(key: KeyMaterial, data: bytes) -> bytes:
    """Inverse of sym_encrypt. A wrong key surfaces as PaddingOrKeyError."""
    raw = _require_aes(key, "symmetric decryption")
    if len(data) < IV_SIZE + _BLOCK or (len(data) - IV_SIZE) % _BLOCK:
        raise MalformedCiphertext(
            f"ciphertext length {len(data)} is not IV plus whole blocks")
    iv, ct = data[:IV_SIZE], data[IV_SIZE:]
    dec = Cipher(algorithms.AES(raw), modes.CBC(iv)).decryptor()
    padded = dec.update(ct) + dec.finalize()
    unpadder = PKCS7(_BLOCK * 8).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError:
        raise PaddingOrKeyError("bad padding: wrong key or corrupted ciphertext") from None


# ---------------------------------------------------------------------------
# key wrap
# ---------------------------------------------------------------------------

_OAEP = asym_padding.OAEP(
    mgf=asym_padding.MGF1(algorithm=hashes.SHA256()),
    algorithm=hashes.SHA256(),
    label=None,
)


def wrap_key(recipient: KeyMaterial, content_key: KeyMaterial) -> bytes:
    """Wrap an AES content key for an RSA recipient (OAEP, SHA-256)."""
    pub = recipient.public_counterpart()
    raw = _require_aes(content_key, "key wrap")
    return pub.key.encrypt(raw, _OAEP)


def unwrap_key(recipient: KeyMaterial, wrapped: bytes, name: str = "cek") -> KeyMaterial:
    if recipient.kind != RSA_PRIVATE:
        raise WrongKeyKind(f"key unwrap needs an rsa-private key, not {recipient.kind}")
    try:
        raw = recipient.key.decrypt(wrapped, _OAEP)
    except ValueError:
        raise UnwrapFailed("key unwrap failed: wrong private key or corrupt value") from None
    if len(raw) * 8 not in _AES_BITS:
        raise UnwrapFailed(f"unwrapped key has invalid size {len(raw)} bytes")
    return KeyMaterial(name, AES_KEY, len(raw) * 8, raw)


# ---------------------------------------------------------------------------
# keystore
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Keystore:
    """Keys loaded from a directory, addressed by file stem."""

    entries: dict[str, KeyMaterial]

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def resolve(self, name: str, kind: str) -> KeyMaterial:
        """Look up a key by name and required kind.

        An rsa-public request is satisfied by a stored private key (the
        public half is derived); any other kind mismatch is an error.
        """
        entry = self.entries.get(name)
        if entry is None:
            raise UnknownKey(f"no key named {name!r} in keystore")
        if entry.kind == kind:
            return entry
        if kind == RSA_PUBLIC and entry.kind == RSA_PRIVATE:
            return entry.public_counterpart()
        raise KindMismatch(f"key {name!r} is {entry.kind}, needed {kind}")


def _load_pem(path: Path, name: str) -> KeyMaterial:
    data = path.read_bytes()
    try:
        key = serialization.load_pem_private_key(data, password=None)
        kind = RSA_PRIVATE
    except ValueError:
        try:
            key = serialization.load_pem_public_key(data)
            kind = RSA_PUBLIC
        except ValueError as exc:
            raise BadKeyFile(f"{path.name}: not a readable PEM key: {exc}") from None
    if not isinstance(key, (rsa.RSAPrivateKey, rsa.RSAPublicKey)):
        raise BadKeyFile(f"{path.name}: only RSA keys are supported")
    return KeyMaterial(name, kind, key.key_size, key)


def _load_raw(path: Path, name: str) -> KeyMaterial:
    data = path.read_bytes()
    if len(data) * 8 not in _AES_BITS:
        raise BadKeyFile(
            f"{path.name}: raw key must be 16 or 32 bytes, got {len(data)}")
    return KeyMaterial(name, AES_KEY, len(data) * 8, data)


def load_keystore(directory: Union[str, os.PathLike]) -> Keystore:
    """Load NAME.pem (RSA) and NAME.key (raw AES) files from a directory.

    The file stem is the key name; other files are ignored. Unreadable
    key files and duplicate names are reported, not skipped.
    """
    root = Path(directory)
    if not root.is_dir():
        raise BadKeyFile(f"keystore {root} is not a directory")
    entries: dict[str, KeyMaterial] = {}
    for path in sorted(root.iterdir()):
        if path.suffix == ".pem":
            km = _load_pem(path, path.stem)
        elif path.suffix == ".key":
            km = _load_raw(path, path.stem)
        else:
            continue
        if km.name in entries:
            raise BadKeyFile(f"duplicate key name {km.name!r} in keystore")
        entries[km.name] = km
    return Keystore(entries)


def save_key(key: KeyMaterial, directory: Union[str, os.PathLike]) -> Path:
    """Write a key into a keystore directory; returns the file path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    if key.kind == RSA_PRIVATE:
        out = root / f"{key.name}.pem"
        out.write_bytes(key.key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ))
    elif key.kind == RSA_PUBLIC:
        out = root / f"{key.name}.pem"
        out.write_bytes(key.key.public_bytes(
            serialization.Encoding.PEM,
            serialization.PublicFormat.SubjectPublicKeyInfo,
        ))
    else:
        out = root / f"{key.name}.key"
        out.write_bytes(key.key)
    return out
