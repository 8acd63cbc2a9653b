"""Digest/signature/encryption primitives against externally produced vectors."""

import dataclasses
from pathlib import Path

import pytest
from cryptography.hazmat.primitives import serialization
from hypothesis import given, settings
from hypothesis import strategies as st

from xmlseal import crypto
from xmlseal.errors import (
    BadKeyFile,
    KindMismatch,
    MalformedCiphertext,
    PaddingOrKeyError,
    UnknownKey,
    UnsupportedAlgorithm,
    UnwrapFailed,
    WrongKeyKind,
)

FIXTURES = Path(__file__).parent / "fixtures" / "rsa_kat"

# NIST FIPS 180-4 example vectors
SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
SHA256_ABC = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
SHA1_ABC = "a9993e364706816aba3e25717850c26c9cd0d89d"


def aes(raw: bytes, name: str = "k") -> crypto.KeyMaterial:
    return crypto.KeyMaterial(name, crypto.AES_KEY, len(raw) * 8, raw)


def test_sha256_known_answers():
    assert crypto.digest(crypto.DigestAlg.SHA256, b"").hex() == SHA256_EMPTY
    assert crypto.digest(crypto.DigestAlg.SHA256, b"abc").hex() == SHA256_ABC
    assert crypto.DigestAlg.SHA256.size == 32


def test_sha1_known_answer():
    assert crypto.digest(crypto.DigestAlg.SHA1, b"abc").hex() == SHA1_ABC
    assert crypto.DigestAlg.SHA1.size == 20
    assert crypto.DigestAlg.SHA1.verify_only
    assert not crypto.DigestAlg.SHA256.verify_only


def load_kat_key() -> crypto.KeyMaterial:
    pem = (FIXTURES / "private.pem").read_bytes()
    key = serialization.load_pem_private_key(pem, password=None)
    return crypto.KeyMaterial("kat", crypto.RSA_PRIVATE, key.key_size, key)


def test_rsa_signature_matches_openssl():
    # signature.bin was produced by `openssl dgst -sha256 -sign private.pem`,
    # independently of this package
    key = load_kat_key()
    message = (FIXTURES / "message.bin").read_bytes()
    expected = (FIXTURES / "signature.bin").read_bytes()
    assert crypto.sign(key, crypto.DigestAlg.SHA256, message) == expected
    assert crypto.verify(key, crypto.DigestAlg.SHA256, message, expected)


def test_rsa_verify_with_public_half():
    key = load_kat_key()
    pub = key.public_counterpart()
    message = (FIXTURES / "message.bin").read_bytes()
    sig = (FIXTURES / "signature.bin").read_bytes()
    assert pub.kind == crypto.RSA_PUBLIC
    assert crypto.verify(pub, crypto.DigestAlg.SHA256, message, sig)
    assert not crypto.verify(pub, crypto.DigestAlg.SHA256, message + b"x", sig)
    assert not crypto.verify(pub, crypto.DigestAlg.SHA256, message, sig[:-1] + b"\x00")


def test_signing_with_sha1_is_refused():
    with pytest.raises(UnsupportedAlgorithm):
        crypto.sign(load_kat_key(), crypto.DigestAlg.SHA1, b"m")


def test_signing_requires_private_key():
    pub = load_kat_key().public_counterpart()
    with pytest.raises(WrongKeyKind):
        crypto.sign(pub, crypto.DigestAlg.SHA256, b"m")


def test_keygen_rsa_and_aes():
    rsa_key = crypto.keygen("rsa", 2048, "k1")
    assert rsa_key.kind == crypto.RSA_PRIVATE and rsa_key.bits == 2048
    aes_key = crypto.keygen("aes", 128, "k2")
    assert aes_key.kind == crypto.AES_KEY and len(aes_key.key) == 16
    with pytest.raises(UnsupportedAlgorithm):
        crypto.keygen("rsa", 1024, "weak")
    with pytest.raises(UnsupportedAlgorithm):
        crypto.keygen("aes", 192, "odd")
    with pytest.raises(UnsupportedAlgorithm):
        crypto.keygen("dsa", 2048, "what")


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=300), st.sampled_from([16, 32]))
def test_sym_round_trip(plaintext, key_len):
    key = aes(b"\x13" * key_len)
    ct = crypto.sym_encrypt(key, plaintext)
    assert crypto.sym_decrypt(key, ct) == plaintext


def test_sym_ciphertext_layout():
    key = aes(b"\x07" * 16)
    ct = crypto.sym_encrypt(key, b"hello")
    # 16-byte IV + one padded block
    assert len(ct) == 32
    assert crypto.sym_encrypt(key, b"hello") != ct  # fresh IV each time


def test_sym_decrypt_wrong_key():
    ct = crypto.sym_encrypt(aes(b"\x01" * 16), b"secret data here!")
    with pytest.raises(PaddingOrKeyError):
        crypto.sym_decrypt(aes(b"\x02" * 16), ct)


@pytest.mark.parametrize("n", [0, 15, 16, 31, 33])
def test_sym_decrypt_malformed(n):
    with pytest.raises(MalformedCiphertext):
        crypto.sym_decrypt(aes(b"\x01" * 16), b"\x00" * n)


def test_sym_requires_aes_key(rsa_keys):
    with pytest.raises(WrongKeyKind):
        crypto.sym_encrypt(rsa_keys["alice"], b"x")


def test_wrap_unwrap_round_trip(rsa_keys):
    alice = rsa_keys["alice"]
    cek = aes(bytes(range(16)), "cek")
    wrapped = crypto.wrap_key(alice.public_counterpart(), cek)
    assert len(wrapped) == 2048 // 8
    out = crypto.unwrap_key(alice, wrapped)
    assert out.key == cek.key and out.kind == crypto.AES_KEY


def test_unwrap_with_wrong_key(rsa_keys):
    wrapped = crypto.wrap_key(rsa_keys["alice"], aes(b"\x05" * 16))
    with pytest.raises(UnwrapFailed):
        crypto.unwrap_key(rsa_keys["bob"], wrapped)


def test_unwrap_rejects_non_aes_sizes(rsa_keys):
    alice = rsa_keys["alice"]
    # wrap 20 raw bytes directly, bypassing the KeyMaterial size check
    wrapped = alice.public_counterpart().key.encrypt(b"\x05" * 20, crypto._OAEP)
    with pytest.raises(UnwrapFailed):
        crypto.unwrap_key(alice, wrapped)


def test_keystore_resolution(keystore, rsa_keys, aes_key):
    assert keystore.resolve("alice", crypto.RSA_PRIVATE) is rsa_keys["alice"]
    # a stored private key satisfies a public-key request by derivation
    pub = keystore.resolve("alice", crypto.RSA_PUBLIC)
    assert pub.kind == crypto.RSA_PUBLIC and pub.name == "alice"
    assert keystore.resolve("shared", crypto.AES_KEY) is aes_key
    with pytest.raises(UnknownKey):
        keystore.resolve("mallory", crypto.RSA_PRIVATE)
    with pytest.raises(KindMismatch):
        keystore.resolve("shared", crypto.RSA_PRIVATE)
    with pytest.raises(KindMismatch):
        keystore.resolve("alice", crypto.AES_KEY)


def test_keystore_dir_round_trip(tmp_path, rsa_keys, aes_key):
    crypto.save_key(rsa_keys["alice"], tmp_path)
    pub = dataclasses.replace(rsa_keys["bob"].public_counterpart(), name="bob-pub")
    crypto.save_key(pub, tmp_path)
    crypto.save_key(aes_key, tmp_path)
    (tmp_path / "notes.txt").write_text("ignored")
    ks = crypto.load_keystore(tmp_path)
    assert set(ks.names()) == {"alice", "bob-pub", "shared"}
    assert ks.resolve("alice", crypto.RSA_PRIVATE).kind == crypto.RSA_PRIVATE
    assert ks.resolve("bob-pub", crypto.RSA_PUBLIC).kind == crypto.RSA_PUBLIC
    assert ks.resolve("shared", crypto.AES_KEY).key == aes_key.key


def test_load_keystore_rejects_garbage_pem(tmp_path):
    (tmp_path / "bad.pem").write_text("-----BEGIN NONSENSE-----\nzzzz\n-----END NONSENSE-----\n")
    with pytest.raises(BadKeyFile):
        crypto.load_keystore(tmp_path)


def test_load_keystore_rejects_bad_raw_key(tmp_path):
    (tmp_path / "short.key").write_bytes(b"\x00" * 7)
    with pytest.raises(BadKeyFile):
        crypto.load_keystore(tmp_path)


def test_load_keystore_needs_directory(tmp_path):
    with pytest.raises(BadKeyFile):
        crypto.load_keystore(tmp_path / "absent")


def test_key_material_repr_hides_secrets(rsa_keys, aes_key):
    assert "key=" not in repr(rsa_keys["alice"])
    assert aes_key.key.hex() not in repr(aes_key)


def test_rsa_public_numbers_round_trip(rsa_keys):
    n, e = crypto.rsa_public_numbers(rsa_keys["alice"])
    rebuilt = crypto.rsa_public_from_numbers(n, e, name="alice")
    sig = crypto.sign(rsa_keys["alice"], crypto.DigestAlg.SHA256, b"check")
    assert crypto.verify(rebuilt, crypto.DigestAlg.SHA256, b"check", sig)
    with pytest.raises(BadKeyFile):
        crypto.rsa_public_from_numbers(6, 2)
