"""XML signatures: enveloped, enveloping and detached topologies.

A signature element looks like this (namespace
``http://www.w3.org/2000/09/xmldsig#``, prefix ``ds`` on the wire):

    <ds:Signature>
      <ds:SignedInfo>
        <ds:CanonicalizationMethod Algorithm="..."/>
        <ds:SignatureMethod Algorithm="...rsa-sha256"/>
        <ds:Reference URI="...">
          <ds:Transforms>...</ds:Transforms>
          <ds:DigestMethod Algorithm="...sha256"/>
          <ds:DigestValue>...</ds:DigestValue>
        </ds:Reference>
      </ds:SignedInfo>
      <ds:SignatureValue>...</ds:SignatureValue>
      <ds:KeyInfo>...</ds:KeyInfo>
      <ds:Object Id="...">...</ds:Object>
    </ds:Signature>

Reference URIs: ``""`` signs the whole document (requires the enveloped
transform, which excludes the signature itself), ``#id`` signs the
element carrying that Id, and a bare name signs external bytes supplied
out of band at verification time (digested raw, without
canonicalization).

Signing always produces RSA-SHA256 over the canonical form; SHA-1 based
signatures are accepted on verification only, and MD5 is rejected
outright. A document may carry exactly one signature; more than one is
an error, never a pick-the-first.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Optional, Sequence

from . import c14n, tree
from ._rand import rand_hex
from .crypto import DigestAlg, KeyMaterial, Keystore
from . import crypto
from .errors import (
    DetachedTargetMissing,
    EmptyTargetName,
    MalformedSignatureBlock,
    MultipleSignatures,
    NoSignatureFound,
    TargetUnresolved,
    UnknownKey,
    UnsupportedAlgorithm,
)

DSIG_NS = "http://www.w3.org/2000/09/xmldsig#"

RSA_SHA256_URI = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256"
RSA_SHA1_URI = "http://www.w3.org/2000/09/xmldsig#rsa-sha1"
SHA256_URI = "http://www.w3.org/2001/04/xmlenc#sha256"
SHA1_URI = "http://www.w3.org/2000/09/xmldsig#sha1"
ENVELOPED_URI = "http://www.w3.org/2000/09/xmldsig#enveloped-signature"

_SIGNATURE_ALGS = {RSA_SHA256_URI: DigestAlg.SHA256, RSA_SHA1_URI: DigestAlg.SHA1}
_DIGEST_ALGS = {SHA256_URI: DigestAlg.SHA256, SHA1_URI: DigestAlg.SHA1}


def _el(local: str, attrs=(), children=(), declare: bool = False) -> tree.Element:
    nsdecls = (("ds", DSIG_NS),) if declare else ()
    return tree.Element(local, ns=DSIG_NS, prefix="ds",
                        attrs=tuple(attrs), nsdecls=nsdecls, children=tuple(children))


def _b64e(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _b64d(text: str, what: str) -> bytes:
    try:
        return base64.b64decode("".join(text.split()), validate=True)
    except (ValueError, TypeError):
        raise MalformedSignatureBlock(f"{what} is not valid base64") from None


def _is_ds(el: tree.Element, local: str) -> bool:
    return el.ns == DSIG_NS and el.local == local


def _find_child(el: tree.Element, local: str) -> Optional[tree.Element]:
    for c in el.child_elements():
        if _is_ds(c, local):
            return c
    return None


def _need_child(el: tree.Element, local: str) -> tree.Element:
    child = _find_child(el, local)
    if child is None:
        raise MalformedSignatureBlock(f"missing {local} element")
    return child


def _need_algorithm(el: tree.Element) -> str:
    value = el.get("Algorithm")
    if value is None:
        raise MalformedSignatureBlock(f"{el.local} lacks an Algorithm attribute")
    return value


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RefSpec:
    """What to sign: a reference URI plus how to obtain the bytes."""

    uri: str
    enveloped: bool = False
    detached_bytes: Optional[bytes] = None


@dataclass(frozen=True)
class Reference:
    uri: str
    transforms: tuple[str, ...]
    digest_alg: DigestAlg
    digest_value: bytes

    @property
    def enveloped(self) -> bool:
        return ENVELOPED_URI in self.transforms


@dataclass(frozen=True)
class SignedInfo:
    c14n_uri: str
    signature_uri: str
    references: tuple[Reference, ...]

    @property
    def signature_alg(self) -> DigestAlg:
        return _SIGNATURE_ALGS[self.signature_uri]


@dataclass(frozen=True)
class SignatureBlock:
    signed_info: SignedInfo
    signature_value: bytes
    key_name: Optional[str]
    embedded_key: Optional[tuple[int, int]]  # (modulus, exponent)
    signed_info_index: int  # child index inside the Signature element


@dataclass(frozen=True)
class ReferenceCheck:
    uri: str
    digest_ok: bool


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a verification: per-reference digests plus the signature.

    The report is valid exactly when every reference digest matched and
    the signature value checked out under the resolved key.
    """

    references: tuple[ReferenceCheck, ...]
    signature_ok: bool
    key_used: str

    @property
    def valid(self) -> bool:
        return self.signature_ok and all(r.digest_ok for r in self.references)

    @property
    def overall(self) -> str:
        return "valid" if self.valid else "invalid"

    @property
    def reason(self) -> Optional[str]:
        if self.valid:
            return None
        for r in self.references:
            if not r.digest_ok:
                return f"digest mismatch for reference {r.uri!r}"
        return "signature value does not verify"

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "references": [{"uri": r.uri, "digestOk": r.digest_ok} for r in self.references],
            "signatureOk": self.signature_ok,
            "keyUsed": self.key_used,
        }


# ---------------------------------------------------------------------------
# building signatures
# ---------------------------------------------------------------------------

def _reference_bytes_for_signing(spec: RefSpec, doc: Optional[tree.Document]) -> bytes:
    if spec.uri == "":
        assert doc is not None
        return c14n.canonicalize(doc).bytes
    if spec.uri.startswith("#"):
        assert doc is not None
        target_id = spec.uri[1:]
        path = tree.path_by_id(doc, target_id)
        if path is None:
            raise TargetUnresolved(f"no element with Id {target_id!r} to sign")
        return c14n.canonicalize(doc, subtree=path).bytes
    if spec.detached_bytes is None:
        raise DetachedTargetMissing(f"no bytes supplied for detached target {spec.uri!r}")
    return spec.detached_bytes


def _reference_element(spec: RefSpec, digest_value: bytes) -> tree.Element:
    children = []
    if spec.enveloped:
        children.append(_el("Transforms", children=(
            _el("Transform", attrs=(tree.Attr("Algorithm", ENVELOPED_URI),)),)))
    children.append(_el("DigestMethod", attrs=(tree.Attr("Algorithm", SHA256_URI),)))
    children.append(_el("DigestValue", children=(tree.Text(_b64e(digest_value)),)))
    return _el("Reference", attrs=(tree.Attr("URI", spec.uri),), children=children)


def _key_info_element(key_hint: Optional[str], signer: KeyMaterial,
                      embed_public: bool) -> Optional[tree.Element]:
    children = []
    if key_hint is not None:
        children.append(_el("KeyName", children=(tree.Text(key_hint),)))
    if embed_public:
        n, e = crypto.rsa_public_numbers(signer)
        n_bytes = n.to_bytes((n.bit_length() + 7) // 8, "big")
        e_bytes = e.to_bytes((e.bit_length() + 7) // 8, "big")
        children.append(_el("KeyValue", children=(
            _el("RSAKeyValue", children=(
                _el("Modulus", children=(tree.Text(_b64e(n_bytes)),)),
                _el("Exponent", children=(tree.Text(_b64e(e_bytes)),)),
            )),
        )))
    if not children:
        return None
    return _el("KeyInfo", children=children)


def build_signature_element(
    doc: Optional[tree.Document],
    refs: Sequence[RefSpec],
    signer: KeyMaterial,
    key_hint: Optional[str] = None,
    *,
    embed_public: bool = False,
    objects: Sequence[tree.Element] = (),
) -> tree.Element:
    """Assemble and sign a complete Signature element.

    Digests are computed against ``doc`` as it stands right now; the
    caller decides where the element is then placed.
    """
    if not refs:
        raise MalformedSignatureBlock("a signature needs at least one reference")
    ref_els = []
    for spec in refs:
        data = _reference_bytes_for_signing(spec, doc)
        ref_els.append(_reference_element(spec, crypto.digest(DigestAlg.SHA256, data)))
    signed_info = _el("SignedInfo", children=(
        _el("CanonicalizationMethod", attrs=(tree.Attr("Algorithm", c14n.ALGORITHM_ID),)),
        _el("SignatureMethod", attrs=(tree.Attr("Algorithm", RSA_SHA256_URI),)),
        *ref_els,
    ))
    signature_value = crypto.sign(
        signer, DigestAlg.SHA256, c14n.canonical_element_bytes(signed_info))
    children: list[tree.Node] = [
        signed_info,
        _el("SignatureValue", children=(tree.Text(_b64e(signature_value)),)),
    ]
    key_info = _key_info_element(key_hint, signer, embed_public)
    if key_info is not None:
        children.append(key_info)
    children.extend(objects)
    return _el("Signature", children=children, declare=True)


def _refuse_existing_signature(doc: tree.Document) -> None:
    for _, el in tree.walk(doc):
        if _is_ds(el, "Signature"):
            raise MultipleSignatures("document already carries a signature")


def sign_enveloped(doc: tree.Document, signer: KeyMaterial,
                   key_hint: Optional[str] = None, *,
                   embed_public: bool = False) -> tree.Document:
    """Sign the whole document; the signature becomes the root's last child.

    The reference has URI ``""`` with the enveloped transform, so the
    digest covers the document with the signature element excluded --
    removing the signature again restores the exact canonical bytes.
    """
    _refuse_existing_signature(doc)
    sig = build_signature_element(
        doc, [RefSpec("", enveloped=True)], signer, key_hint, embed_public=embed_public)
    return tree.insert_child(doc, tree.NodePath(), sig)


def sign_enveloping(payload: tree.Element, signer: KeyMaterial,
                    key_hint: Optional[str] = None, *,
                    embed_public: bool = False) -> tree.Document:
    """Wrap ``payload`` in an Object inside a new Signature document."""
    payload_doc = tree.Document(payload)
    _refuse_existing_signature(payload_doc)
    payload_ids = set(tree.collect_ids(payload_doc))
    object_id = "obj-" + rand_hex(8)
    while object_id in payload_ids:
        object_id = "obj-" + rand_hex(8)
    obj = _el("Object", attrs=(tree.Attr("Id", object_id),), children=(payload,))
    sig = build_signature_element(
        tree.Document(obj), [RefSpec(f"#{object_id}")],
        signer, key_hint, embed_public=embed_public, objects=(obj,))
    return tree.Document(sig)


def sign_detached(target: bytes, target_name: str, signer: KeyMaterial,
                  key_hint: Optional[str] = None, *,
                  embed_public: bool = False) -> tree.Document:
    """Standalone signature document over external bytes.

    The target bytes are digested exactly as supplied -- no parsing, no
    canonicalization -- so the same name must resolve to bit-identical
    content at verification time.
    """
    if not target_name:
        raise EmptyTargetName("detached signing requires a non-empty target name")
    sig = build_signature_element(
        None, [RefSpec(target_name, detached_bytes=target)],
        signer, key_hint, embed_public=embed_public)
    return tree.Document(sig)


def extract_payload(doc: tree.Document) -> tree.Element:
    """The payload element out of an enveloping signature document.

    Exactly one Object is required: with several, "the" payload would be
    ambiguous and an attacker could park a decoy next to the signed one.
    """
    if not _is_ds(doc.root, "Signature"):
        raise MalformedSignatureBlock("document root is not a Signature element")
    objects = [c for c in doc.root.child_elements() if _is_ds(c, "Object")]
    if not objects:
        raise MalformedSignatureBlock("signature carries no Object element")
    if len(objects) > 1:
        raise MalformedSignatureBlock(
            f"signature carries {len(objects)} Object elements; payload is ambiguous")
    inner = objects[0].child_elements()
    if len(inner) != 1:
        raise MalformedSignatureBlock("Object must wrap exactly one payload element")
    return inner[0]


# ---------------------------------------------------------------------------
# parsing and verification
# ---------------------------------------------------------------------------

def parse_signature_block(sig_el: tree.Element) -> SignatureBlock:
    """Structured view of a Signature element; rejects what it cannot check."""
    si_index = None
    for i, child in enumerate(sig_el.children):
        if isinstance(child, tree.Element) and _is_ds(child, "SignedInfo"):
            si_index = i
            break
    if si_index is None:
        raise MalformedSignatureBlock("missing SignedInfo element")
    si_el = sig_el.children[si_index]

    c14n_uri = _need_algorithm(_need_child(si_el, "CanonicalizationMethod"))
    if c14n_uri != c14n.ALGORITHM_ID:
        raise UnsupportedAlgorithm(f"canonicalization {c14n_uri!r} is not supported")
    sig_uri = _need_algorithm(_need_child(si_el, "SignatureMethod"))
    if sig_uri not in _SIGNATURE_ALGS:
        raise UnsupportedAlgorithm(f"signature algorithm {sig_uri!r} is not supported")

    references = []
    for ref_el in si_el.child_elements():
        if not _is_ds(ref_el, "Reference"):
            continue
        transforms = []
        transforms_el = _find_child(ref_el, "Transforms")
        if transforms_el is not None:
            for t in transforms_el.child_elements():
                uri = _need_algorithm(t)
                if uri != ENVELOPED_URI:
                    raise UnsupportedAlgorithm(f"transform {uri!r} is not supported")
                transforms.append(uri)
        digest_uri = _need_algorithm(_need_child(ref_el, "DigestMethod"))
        if digest_uri not in _DIGEST_ALGS:
            raise UnsupportedAlgorithm(f"digest algorithm {digest_uri!r} is not supported")
        digest_alg = _DIGEST_ALGS[digest_uri]
        digest_value = _b64d(_need_child(ref_el, "DigestValue").text_content(), "DigestValue")
        if len(digest_value) != digest_alg.size:
            raise MalformedSignatureBlock(
                f"DigestValue is {len(digest_value)} bytes; "
                f"{digest_alg.value} digests are {digest_alg.size}")
        references.append(Reference(
            ref_el.get("URI") or "", tuple(transforms), digest_alg, digest_value))
    if not references:
        raise MalformedSignatureBlock("SignedInfo holds no Reference")

    signature_value = _b64d(
        _need_child(sig_el, "SignatureValue").text_content(), "SignatureValue")

    key_name = None
    embedded = None
    key_info = _find_child(sig_el, "KeyInfo")
    if key_info is not None:
        name_el = _find_child(key_info, "KeyName")
        if name_el is not None:
            key_name = name_el.text_content().strip()
        key_value = _find_child(key_info, "KeyValue")
        if key_value is not None:
            rsa_el = _find_child(key_value, "RSAKeyValue")
            if rsa_el is None:
                raise MalformedSignatureBlock("KeyValue without RSAKeyValue")
            n = int.from_bytes(
                _b64d(_need_child(rsa_el, "Modulus").text_content(), "Modulus"), "big")
            e = int.from_bytes(
                _b64d(_need_child(rsa_el, "Exponent").text_content(), "Exponent"), "big")
            embedded = (n, e)

    return SignatureBlock(
        SignedInfo(c14n_uri, sig_uri, tuple(references)),
        signature_value, key_name, embedded, si_index)


def _resolve_verification_key(
    block: SignatureBlock, keystore: Keystore, trust_embedded_keys: bool,
) -> tuple[KeyMaterial, str]:
    if block.key_name:
        return keystore.resolve(block.key_name, crypto.RSA_PUBLIC), block.key_name
    if block.embedded_key is not None:
        if not trust_embedded_keys:
            raise UnknownKey(
                "signature carries only an embedded key; "
                "pass trust_embedded_keys=True to accept it")
        n, e = block.embedded_key
        return crypto.rsa_public_from_numbers(n, e), "embedded"
    raise UnknownKey("signature carries no usable key information")


def verify(
    doc: tree.Document,
    keystore: Keystore,
    *,
    detached_target: Optional[bytes] = None,
    trust_embedded_keys: bool = False,
) -> VerificationReport:
    """Check the document's single signature against its current content.

    Every reference digest is recomputed from the document as given --
    post-signing mutation of signed content therefore shows up as a
    digest mismatch. Key resolution goes through the keystore by name;
    embedded public keys are honored only on explicit opt-in.
    """
    signatures = [(p, el) for p, el in tree.walk(doc) if _is_ds(el, "Signature")]
    if not signatures:
        raise NoSignatureFound("document carries no signature")
    if len(signatures) > 1:
        raise MultipleSignatures(f"document carries {len(signatures)} signatures")
    sig_path, sig_el = signatures[0]

    block = parse_signature_block(sig_el)
    key, key_used = _resolve_verification_key(block, keystore, trust_embedded_keys)

    checks = []
    for ref in block.signed_info.references:
        if ref.uri == "":
            if not ref.enveloped:
                raise MalformedSignatureBlock(
                    "whole-document reference requires the enveloped transform")
            data = c14n.canonicalize(doc, exclude=sig_path).bytes
        elif ref.uri.startswith("#"):
            target = tree.path_by_id(doc, ref.uri[1:])
            if target is None:
                checks.append(ReferenceCheck(ref.uri, False))
                continue
            exclude = sig_path if ref.enveloped and sig_path.is_within(target) else None
            data = c14n.canonicalize(doc, subtree=target, exclude=exclude).bytes
        else:
            if detached_target is None:
                raise DetachedTargetMissing(
                    f"reference {ref.uri!r} needs detached target bytes")
            data = detached_target
        digest_ok = crypto.digest(ref.digest_alg, data) == ref.digest_value
        checks.append(ReferenceCheck(ref.uri, digest_ok))

    si_path = sig_path.child(block.signed_info_index)
    si_bytes = c14n.canonicalize(doc, subtree=si_path).bytes
    signature_ok = crypto.verify(
        key, block.signed_info.signature_alg, si_bytes, block.signature_value)

    return VerificationReport(tuple(checks), signature_ok, key_used)
