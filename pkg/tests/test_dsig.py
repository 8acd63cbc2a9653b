"""Signing and verification across the three signature topologies."""

import base64

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import padding

from xmlseal import c14n, crypto, dsig, tree
from xmlseal.errors import (
    DetachedTargetMissing,
    EmptyTargetName,
    MalformedSignatureBlock,
    MultipleSignatures,
    NoSignatureFound,
    UnknownKey,
    UnsupportedAlgorithm,
)

PAYLOAD = b'<order xmlns="urn:shop" Id="o1"><item sku="A17">2</item><total>19.80</total></order>'


def signed_enveloped(rsa_keys) -> tree.Document:
    return dsig.sign_enveloped(tree.parse(PAYLOAD), rsa_keys["alice"], key_hint="alice")


def reserialize(doc: tree.Document) -> tree.Document:
    return tree.parse(tree.serialize(doc))


# -- enveloped -------------------------------------------------------------------

def test_enveloped_round_trip(rsa_keys, keystore):
    signed = signed_enveloped(rsa_keys)
    report = dsig.verify(reserialize(signed), keystore)
    assert report.valid
    assert report.key_used == "alice"
    assert [r.uri for r in report.references] == [""]


def test_enveloped_verifies_with_public_key_only(rsa_keys, public_keystore):
    signed = signed_enveloped(rsa_keys)
    assert dsig.verify(signed, public_keystore).valid


def test_enveloped_signature_is_last_child(rsa_keys):
    signed = signed_enveloped(rsa_keys)
    last = signed.root.child_elements()[-1]
    assert last.ns == dsig.DSIG_NS and last.local == "Signature"


def test_removing_signature_restores_canonical_bytes(rsa_keys):
    original = tree.parse(PAYLOAD)
    signed = signed_enveloped(rsa_keys)
    stripped = tree.remove_child(signed, tree.NodePath(), len(signed.root.children) - 1)
    assert c14n.canonicalize(stripped).bytes == c14n.canonicalize(original).bytes


def test_tampered_content_fails_digest_not_signature(rsa_keys, keystore):
    signed = signed_enveloped(rsa_keys)
    raw = tree.serialize(signed).replace(b"19.80", b"19.99")
    report = dsig.verify(tree.parse(raw), keystore)
    assert not report.valid
    assert not report.references[0].digest_ok
    # signed-info itself was untouched, so the RSA check still passes
    assert report.signature_ok
    assert "digest mismatch" in report.reason


def test_tampered_signature_value(rsa_keys, keystore):
    signed = reserialize(signed_enveloped(rsa_keys))
    raw = tree.serialize(signed)
    sig_el = signed.root.child_elements()[-1]
    for child in sig_el.child_elements():
        if child.local == "SignatureValue":
            old = child.text_content()
    flipped = base64.b64encode(bytes(
        b ^ (0x01 if i == 0 else 0) for i, b in enumerate(base64.b64decode(old))))
    report = dsig.verify(tree.parse(raw.replace(old.encode(), flipped)), keystore)
    assert not report.signature_ok and not report.valid
    assert report.reason == "signature value does not verify"


def test_tampered_digest_value_breaks_both(rsa_keys, keystore):
    signed = signed_enveloped(rsa_keys)
    raw = tree.serialize(signed)
    block = dsig.parse_signature_block(signed.root.child_elements()[-1])
    old = base64.b64encode(block.signed_info.references[0].digest_value)
    forged = base64.b64encode(bytes(32))
    report = dsig.verify(tree.parse(raw.replace(old, forged)), keystore)
    assert not report.references[0].digest_ok
    assert not report.signature_ok  # SignedInfo no longer matches the RSA value


def test_sign_refuses_doc_with_existing_signature(rsa_keys):
    signed = signed_enveloped(rsa_keys)
    with pytest.raises(MultipleSignatures):
        dsig.sign_enveloped(signed, rsa_keys["bob"])


def test_verify_requires_exactly_one_signature(rsa_keys, keystore):
    with pytest.raises(NoSignatureFound):
        dsig.verify(tree.parse(PAYLOAD), keystore)
    signed = signed_enveloped(rsa_keys)
    sig_el = signed.root.child_elements()[-1]
    doubled = tree.insert_child(signed, tree.NodePath(), sig_el)
    with pytest.raises(MultipleSignatures):
        dsig.verify(doubled, keystore)


def test_unknown_signer_name(rsa_keys, keystore):
    signed = dsig.sign_enveloped(tree.parse(PAYLOAD), rsa_keys["alice"], key_hint="nobody")
    with pytest.raises(UnknownKey):
        dsig.verify(signed, keystore)


def test_wrong_key_resolves_but_fails(rsa_keys, keystore):
    # hint says bob, signature was made by alice
    signed = dsig.sign_enveloped(tree.parse(PAYLOAD), rsa_keys["alice"], key_hint="bob")
    report = dsig.verify(signed, keystore)
    assert not report.signature_ok
    assert report.key_used == "bob"


# -- embedded keys -----------------------------------------------------------------

def test_embedded_key_requires_opt_in(rsa_keys, keystore):
    signed = dsig.sign_enveloped(tree.parse(PAYLOAD), rsa_keys["alice"], embed_public=True)
    empty = crypto.Keystore({})
    with pytest.raises(UnknownKey):
        dsig.verify(signed, empty)
    report = dsig.verify(signed, empty, trust_embedded_keys=True)
    assert report.valid and report.key_used == "embedded"


def test_key_name_wins_over_embedded(rsa_keys, keystore):
    signed = dsig.sign_enveloped(
        tree.parse(PAYLOAD), rsa_keys["alice"], key_hint="alice", embed_public=True)
    report = dsig.verify(signed, keystore, trust_embedded_keys=True)
    assert report.valid and report.key_used == "alice"


# -- enveloping --------------------------------------------------------------------

def test_enveloping_round_trip(rsa_keys, keystore):
    payload = tree.parse(PAYLOAD).root
    signed = dsig.sign_enveloping(payload, rsa_keys["carol"], key_hint="carol")
    assert signed.root.local == "Signature"
    report = dsig.verify(reserialize(signed), keystore)
    assert report.valid
    assert report.references[0].uri.startswith("#obj-")
    assert dsig.extract_payload(signed) == payload


def test_enveloping_object_tamper_detected(rsa_keys, keystore):
    signed = dsig.sign_enveloping(tree.parse(PAYLOAD).root, rsa_keys["carol"], key_hint="carol")
    raw = tree.serialize(signed).replace(b'sku="A17"', b'sku="B99"')
    report = dsig.verify(tree.parse(raw), keystore)
    assert not report.valid and not report.references[0].digest_ok


def test_enveloping_object_id_never_collides(rsa_keys):
    payload = tree.parse(b'<p Id="obj-deadbeef"><q/></p>').root
    signed = dsig.sign_enveloping(payload, rsa_keys["alice"], key_hint="alice")
    ids = tree.collect_ids(signed)
    assert len(ids) == len(set(ids))


def test_extract_payload_errors(rsa_keys):
    with pytest.raises(MalformedSignatureBlock):
        dsig.extract_payload(tree.parse(PAYLOAD))
    enveloped = signed_enveloped(rsa_keys)  # has Signature but no Object
    sig_only = tree.Document(enveloped.root.child_elements()[-1])
    with pytest.raises(MalformedSignatureBlock):
        dsig.extract_payload(sig_only)


# -- detached ----------------------------------------------------------------------

def test_detached_round_trip(rsa_keys, keystore):
    target = b"arbitrary bytes \x00\xff -- not XML at all"
    signed = dsig.sign_detached(target, "report.bin", rsa_keys["dave"], key_hint="dave")
    report = dsig.verify(reserialize(signed), keystore, detached_target=target)
    assert report.valid
    assert report.references[0].uri == "report.bin"


def test_detached_digest_is_over_raw_bytes(rsa_keys, keystore):
    # whitespace-only difference must fail: no canonicalization applies
    target = b"<a>  </a>"
    signed = dsig.sign_detached(target, "t.xml", rsa_keys["dave"], key_hint="dave")
    report = dsig.verify(signed, keystore, detached_target=b"<a> </a>")
    assert not report.valid and not report.references[0].digest_ok


def test_detached_needs_target_at_verify(rsa_keys, keystore):
    signed = dsig.sign_detached(b"x", "t", rsa_keys["dave"], key_hint="dave")
    with pytest.raises(DetachedTargetMissing):
        dsig.verify(signed, keystore)


def test_detached_needs_target_name():
    with pytest.raises(EmptyTargetName):
        dsig.sign_detached(b"x", "", crypto.keygen("rsa", 2048, "k"))


# -- reference to a missing id ------------------------------------------------------

def test_missing_reference_target_reported_not_raised(rsa_keys, keystore):
    signed = dsig.sign_enveloping(tree.parse(PAYLOAD).root, rsa_keys["alice"], key_hint="alice")
    block = dsig.parse_signature_block(signed.root)
    obj_id = block.signed_info.references[0].uri[1:]
    raw = tree.serialize(signed).replace(
        f'Id="{obj_id}"'.encode(), f'Id="{obj_id}x"'.encode())
    report = dsig.verify(tree.parse(raw), keystore)
    assert not report.valid
    assert report.references[0].digest_ok is False


# -- algorithm policing ---------------------------------------------------------------

def rewired(doc: tree.Document, old: str, new: str) -> tree.Document:
    raw = tree.serialize(doc)
    assert raw.count(old.encode()) == 1
    return tree.parse(raw.replace(old.encode(), new.encode()))


def test_unknown_signature_algorithm_rejected(rsa_keys, keystore):
    bad = rewired(signed_enveloped(rsa_keys), dsig.RSA_SHA256_URI,
                  "http://www.w3.org/2001/04/xmldsig-more#rsa-md5")
    with pytest.raises(UnsupportedAlgorithm):
        dsig.verify(bad, keystore)


def test_unknown_c14n_algorithm_rejected(rsa_keys, keystore):
    bad = rewired(signed_enveloped(rsa_keys), c14n.ALGORITHM_ID,
                  "http://www.w3.org/2006/12/xml-c14n11")
    with pytest.raises(UnsupportedAlgorithm):
        dsig.verify(bad, keystore)


def test_unknown_transform_rejected(rsa_keys, keystore):
    bad = rewired(signed_enveloped(rsa_keys), dsig.ENVELOPED_URI,
                  "http://www.w3.org/TR/1999/REC-xslt-19991116")
    with pytest.raises(UnsupportedAlgorithm):
        dsig.verify(bad, keystore)


def test_garbage_base64_rejected(rsa_keys, keystore):
    signed = signed_enveloped(rsa_keys)
    block = dsig.parse_signature_block(signed.root.child_elements()[-1])
    old = base64.b64encode(block.signed_info.references[0].digest_value).decode()
    bad = rewired(signed, old, "!!!not base64!!!")
    with pytest.raises(MalformedSignatureBlock):
        dsig.verify(bad, keystore)


def test_wrong_digest_length_rejected(rsa_keys, keystore):
    signed = signed_enveloped(rsa_keys)
    block = dsig.parse_signature_block(signed.root.child_elements()[-1])
    old = base64.b64encode(block.signed_info.references[0].digest_value).decode()
    bad = rewired(signed, old, base64.b64encode(b"\x00" * 20).decode())
    with pytest.raises(MalformedSignatureBlock):
        dsig.verify(bad, keystore)


# -- verify-only acceptance of legacy SHA-1 signatures --------------------------------

def legacy_sha1_signature(doc: tree.Document, signer, key_hint: str) -> tree.Document:
    """Assemble an RSA-SHA1 signature the way an old signer would."""
    digest = crypto.digest(crypto.DigestAlg.SHA1, c14n.canonicalize(doc).bytes)
    signed_info = dsig._el("SignedInfo", children=(
        dsig._el("CanonicalizationMethod", attrs=(tree.Attr("Algorithm", c14n.ALGORITHM_ID),)),
        dsig._el("SignatureMethod", attrs=(tree.Attr("Algorithm", dsig.RSA_SHA1_URI),)),
        dsig._el("Reference", attrs=(tree.Attr("URI", ""),), children=(
            dsig._el("Transforms", children=(
                dsig._el("Transform", attrs=(tree.Attr("Algorithm", dsig.ENVELOPED_URI),)),)),
            dsig._el("DigestMethod", attrs=(tree.Attr("Algorithm", dsig.SHA1_URI),)),
            dsig._el("DigestValue", children=(
                tree.Text(base64.b64encode(digest).decode()),)),
        )),
    ))
    si_bytes = c14n.canonical_element_bytes(signed_info)
    sig_value = signer.key.sign(si_bytes, padding.PKCS1v15(), hashes.SHA1())
    signature = dsig._el("Signature", children=(
        signed_info,
        dsig._el("SignatureValue", children=(
            tree.Text(base64.b64encode(sig_value).decode()),)),
        dsig._el("KeyInfo", children=(
            dsig._el("KeyName", children=(tree.Text(key_hint),)),)),
    ), declare=True)
    return tree.insert_child(doc, tree.NodePath(), signature)


def test_sha1_signature_verifies_but_cannot_be_minted(rsa_keys, keystore):
    signed = legacy_sha1_signature(tree.parse(PAYLOAD), rsa_keys["alice"], "alice")
    report = dsig.verify(reserialize(signed), keystore)
    assert report.valid
    # but the signing path refuses to produce one
    with pytest.raises(UnsupportedAlgorithm):
        crypto.sign(rsa_keys["alice"], crypto.DigestAlg.SHA1, b"x")
