"""Shared fixtures. RSA generation is slow, so keypairs are session-scoped."""

import pytest

from xmlseal import crypto


@pytest.fixture(scope="session")
def rsa_keys():
    """Four named RSA keypairs: enough for multi-party scenarios."""
    return {name: crypto.keygen("rsa", 2048, name)
            for name in ("alice", "bob", "carol", "dave")}


@pytest.fixture(scope="session")
def aes_key():
    return crypto.keygen("aes", 256, "shared")


@pytest.fixture(scope="session")
def keystore(rsa_keys, aes_key):
    """Keystore holding every private key plus the shared AES key."""
    entries = dict(rsa_keys)
    entries["shared"] = aes_key
    return crypto.Keystore(entries)


@pytest.fixture(scope="session")
def public_keystore(rsa_keys):
    """Verification-side keystore: public halves only, no AES key."""
    return crypto.Keystore(
        {name: km.public_counterpart() for name, km in rsa_keys.items()})


@pytest.fixture()
def keystore_dir(tmp_path, rsa_keys, aes_key):
    """The same keys written out as files, for CLI runs."""
    d = tmp_path / "ks"
    for km in rsa_keys.values():
        crypto.save_key(km, d)
    crypto.save_key(aes_key, d)
    return d
