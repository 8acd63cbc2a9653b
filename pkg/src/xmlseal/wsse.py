"""SOAP message protection: signing and encryption composed in either order.

An envelope is protected by adding a Security header:

    <soap:Envelope>
      <soap:Header>
        <wsse:Security> ... signature / key material ... </wsse:Security>
      </soap:Header>
      <soap:Body wsu:Id="body-...">payload</soap:Body>
    </soap:Envelope>

Two composition orders are supported, and they have genuinely different
wire shapes:

* ``sign-then-encrypt`` -- the Body content is signed, then both the
  Body content and the Signature element itself are encrypted under one
  fresh content key. Nothing signature-related remains readable: the
  only cleartext security material is an EncryptedKey (whose
  ``Recipient`` attribute names the intended reader) and two
  EncryptedData elements. A bystander cannot even tell who signed.
* ``encrypt-then-sign`` -- the Body content is encrypted first and the
  signature is computed over the resulting EncryptedData element. The
  signature is public: anyone holding the signer's public key can check
  envelope integrity without being able to (or needing to) decrypt.

``unprotect`` reverses whichever order it finds, verifies the signature
(before decryption when the signature is in the clear, after otherwise),
strips the Security header and returns the restored envelope together
with the verification report and the detected order. A failed
verification raises and never hands back decrypted content.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import dsig, enc, tree
from ._rand import rand_hex
from .crypto import KeyMaterial, Keystore, keygen
from .errors import (
    AlreadyProtected,
    InputError,
    InvalidSignature,
    NoEncryptedData,
    NotProtected,
    NotSoapEnvelope,
)

SOAP_NS = "http://schemas.xmlsoap.org/soap/envelope/"
WSSE_NS = ("http://docs.oasis-open.org/wss/2004/01/"
           "oasis-200401-wss-wssecurity-secext-1.0.xsd")
WSU_NS = tree.WSU_NS

SIGN_THEN_ENCRYPT = "sign-then-encrypt"
ENCRYPT_THEN_SIGN = "encrypt-then-sign"
ORDERS = (SIGN_THEN_ENCRYPT, ENCRYPT_THEN_SIGN)


def _is(el: tree.Element, ns: str, local: str) -> bool:
    return el.ns == ns and el.local == local


@dataclass(frozen=True)
class SoapEnvelope:
    """A validated SOAP envelope: one Body, at most one Header/Security."""

    doc: tree.Document

    def __post_init__(self):
        root = self.doc.root
        if not _is(root, SOAP_NS, "Envelope"):
            raise NotSoapEnvelope("root element is not a SOAP Envelope")
        bodies = [c for c in root.child_elements() if _is(c, SOAP_NS, "Body")]
        if len(bodies) != 1:
            raise NotSoapEnvelope(f"envelope has {len(bodies)} Body elements, not 1")
        headers = [c for c in root.child_elements() if _is(c, SOAP_NS, "Header")]
        if len(headers) > 1:
            raise NotSoapEnvelope("envelope has more than one Header")
        if headers:
            securities = [c for c in headers[0].child_elements()
                          if _is(c, WSSE_NS, "Security")]
            if len(securities) > 1:
                raise NotSoapEnvelope("envelope has more than one Security header")

    # -- structure accessors (paths recomputed; documents are immutable) --

    def body(self) -> tuple[tree.NodePath, tree.Element]:
        for i, c in enumerate(self.doc.root.children):
            if isinstance(c, tree.Element) and _is(c, SOAP_NS, "Body"):
                return tree.NodePath((i,)), c
        raise NotSoapEnvelope("envelope lost its Body")  # unreachable after init

    def header(self) -> Optional[tuple[tree.NodePath, tree.Element]]:
        for i, c in enumerate(self.doc.root.children):
            if isinstance(c, tree.Element) and _is(c, SOAP_NS, "Header"):
                return tree.NodePath((i,)), c
        return None

    def security(self) -> Optional[tuple[tree.NodePath, tree.Element]]:
        found = self.header()
        if found is None:
            return None
        hpath, header = found
        for i, c in enumerate(header.children):
            if isinstance(c, tree.Element) and _is(c, WSSE_NS, "Security"):
                return hpath.child(i), c
        return None

    def payload(self) -> tuple[tree.Node, ...]:
        return self.body()[1].children

    def serialize(self) -> bytes:
        return tree.serialize(self.doc)


def is_soap_envelope(doc: tree.Document) -> bool:
    return _is(doc.root, SOAP_NS, "Envelope")


def wrap_soap(payload: tree.Element) -> SoapEnvelope:
    """A minimal envelope around ``payload``: Header + Body with a fresh Id."""
    taken = set(tree.collect_ids(tree.Document(payload)))
    body_id = "body-" + rand_hex(8)
    while body_id in taken:
        body_id = "body-" + rand_hex(8)
    header = tree.Element("Header", ns=SOAP_NS, prefix="soap")
    body = tree.Element(
        "Body", ns=SOAP_NS, prefix="soap",
        attrs=(tree.Attr("Id", body_id, ns=WSU_NS, prefix="wsu"),),
        children=(payload,),
    )
    envelope = tree.Element(
        "Envelope", ns=SOAP_NS, prefix="soap",
        nsdecls=(("soap", SOAP_NS), ("wsu", WSU_NS)),
        children=(header, body),
    )
    return SoapEnvelope(tree.Document(envelope))


def _security_element(children=()) -> tree.Element:
    return tree.Element("Security", ns=WSSE_NS, prefix="wsse",
                        nsdecls=(("wsse", WSSE_NS),), children=tuple(children))


def _ensure_header(doc: tree.Document) -> tree.Document:
    for c in doc.root.children:
        if isinstance(c, tree.Element) and _is(c, SOAP_NS, "Header"):
            return doc
    header = tree.Element("Header", ns=SOAP_NS, prefix="soap")
    return tree.insert_child(doc, tree.NodePath(), header, index=0)


def _ensure_body_id(doc: tree.Document) -> tuple[tree.Document, str]:
    path, body = SoapEnvelope(doc).body()
    existing = body.id_value()
    if existing is not None:
        return doc, existing
    taken = set(tree.collect_ids(doc))
    body_id = "body-" + rand_hex(8)
    while body_id in taken:
        body_id = "body-" + rand_hex(8)
    attrs = body.attrs + (tree.Attr("Id", body_id, ns=WSU_NS, prefix="wsu"),)
    nsdecls = body.nsdecls
    if tree.inscope_bindings(doc, path).get("wsu") != WSU_NS:
        nsdecls = nsdecls + (("wsu", WSU_NS),)
    new_body = tree.Element(body.local, ns=body.ns, attrs=attrs,
                            nsdecls=nsdecls, children=body.children,
                            prefix=body.prefix)
    return tree.replace_element(doc, path, new_body), body_id


def _fresh_id(doc: tree.Document, stem: str) -> str:
    taken = set(tree.collect_ids(doc))
    candidate = f"{stem}-{rand_hex(8)}"
    while candidate in taken:
        candidate = f"{stem}-{rand_hex(8)}"
    return candidate


def _find_one(doc: tree.Document, ns: str, local: str,
              within: Optional[tree.NodePath] = None) -> Optional[tree.NodePath]:
    for path, el in tree.walk(doc):
        if _is(el, ns, local) and (within is None or path.is_within(within)):
            return path
    return None


def protect(env: SoapEnvelope, order: str, signer: KeyMaterial,
            recipient: KeyMaterial) -> SoapEnvelope:
    """Add a Security header carrying the chosen protection order.

    ``signer`` is the sender's RSA private key (its name becomes the
    signature's key hint); ``recipient`` is the reader's RSA public key.
    A fresh AES-128 content key is generated per call and travels
    wrapped in an EncryptedKey addressed to the recipient by name.
    """
    if order not in ORDERS:
        raise InputError(f"order must be one of {ORDERS}, not {order!r}")
    if env.security() is not None:
        raise AlreadyProtected("envelope already carries a Security header")
    doc = _ensure_header(env.doc)
    doc, body_id = _ensure_body_id(doc)
    cek = keygen("aes", 128, "cek")
    encrypted_key = enc.build_encrypted_key(recipient, cek, recipient_attr=True)

    if order == SIGN_THEN_ENCRYPT:
        signature = dsig.build_signature_element(
            doc, [dsig.RefSpec(f"#{body_id}")], signer, key_hint=signer.name)
        header_path, _ = SoapEnvelope(doc).header()
        doc = tree.insert_child(doc, header_path, _security_element((signature,)))
        body_path, _ = SoapEnvelope(doc).body()
        doc = enc.encrypt_element(doc, body_path, enc.CONTENT_MODE,
                                  None, content_key=cek)
        sig_path = _find_one(doc, dsig.DSIG_NS, "Signature")
        doc = enc.encrypt_element(doc, sig_path, enc.ELEMENT_MODE,
                                  None, content_key=cek)
        sec_path = _find_one(doc, WSSE_NS, "Security")
        doc = tree.insert_child(doc, sec_path, encrypted_key, index=0)
    else:
        enc_id = _fresh_id(doc, "enc")
        body_path, _ = SoapEnvelope(doc).body()
        doc = enc.encrypt_element(doc, body_path, enc.CONTENT_MODE,
                                  None, content_key=cek, enc_id=enc_id)
        header_path, _ = SoapEnvelope(doc).header()
        doc = tree.insert_child(doc, header_path, _security_element((encrypted_key,)))
        signature = dsig.build_signature_element(
            doc, [dsig.RefSpec(f"#{enc_id}")], signer, key_hint=signer.name)
        sec_path = _find_one(doc, WSSE_NS, "Security")
        doc = tree.insert_child(doc, sec_path, signature)

    return SoapEnvelope(doc)


def _content_key_from_security(sec_el: tree.Element,
                               keystore: Keystore) -> Optional[KeyMaterial]:
    for c in sec_el.child_elements():
        if c.ns == enc.XENC_NS and c.local == "EncryptedKey":
            return enc.unwrap_encrypted_key(c, keystore)
    return None


def _signature_covers_body(doc: tree.Document, report: dsig.VerificationReport,
                           order: str) -> bool:
    """Guard against relocation: the verified reference must bind the Body.

    A digest that checks out only says the referenced element is intact,
    not that it is the element the caller is about to consume. For
    sign-then-encrypt the signed target must contain the Body; for
    encrypt-then-sign the Body must consist of exactly the signed
    ciphertext element. Anything else is attacker-shaped.
    """
    body_path, body_el = SoapEnvelope(doc).body()
    for ref in report.references:
        if ref.uri == "":
            return True
        if not ref.uri.startswith("#"):
            continue
        target = tree.path_by_id(doc, ref.uri[1:])
        if target is None:
            continue
        if order == SIGN_THEN_ENCRYPT and body_path.is_within(target):
            return True
        if (order == ENCRYPT_THEN_SIGN and len(body_el.children) == 1
                and target == body_path.child(0)):
            return True
    return False


def unprotect(env: SoapEnvelope,
              keystore: Keystore) -> tuple[SoapEnvelope, dsig.VerificationReport, str]:
    """Verify, decrypt and strip the Security header.

    Returns the restored envelope, the verification report and the
    detected protection order. Raises InvalidSignature (report attached)
    rather than returning content whose signature does not check out.
    """
    found = env.security()
    if found is None:
        raise NotProtected("envelope carries no Security header")
    sec_path, sec_el = found

    clear_signature = _find_one(env.doc, dsig.DSIG_NS, "Signature", within=sec_path)
    has_encrypted = _find_one(env.doc, enc.XENC_NS, "EncryptedData") is not None

    if clear_signature is not None:
        order = ENCRYPT_THEN_SIGN
        report = dsig.verify(env.doc, keystore)
        if not report.valid:
            raise InvalidSignature(f"envelope signature is invalid: {report.reason}",
                                   report=report, order=order)
        if not has_encrypted:
            raise NoEncryptedData("envelope is signed but nothing is encrypted")
        if not _signature_covers_body(env.doc, report, order):
            raise InvalidSignature("signature does not cover the message body",
                                   report=report, order=order)
        cek = _content_key_from_security(sec_el, keystore)
        doc = enc.decrypt(env.doc, keystore, default_key=cek)
    elif has_encrypted:
        order = SIGN_THEN_ENCRYPT
        cek = _content_key_from_security(sec_el, keystore)
        doc = enc.decrypt(env.doc, keystore, default_key=cek)
        report = dsig.verify(doc, keystore)
        if not report.valid:
            raise InvalidSignature(f"envelope signature is invalid: {report.reason}",
                                   report=report, order=order)
        if not _signature_covers_body(doc, report, order):
            raise InvalidSignature("signature does not cover the message body",
                                   report=report, order=order)
    else:
        raise NotProtected("Security header carries no recognized protection")

    sec_path = _find_one(doc, WSSE_NS, "Security")
    doc = tree.remove_child(doc, sec_path.parent(), sec_path.indices[-1])
    return SoapEnvelope(doc), report, order
