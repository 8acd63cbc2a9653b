"""Hybrid XML encryption: replace an element (or its content) with
an EncryptedData element, and reverse the substitution on decryption.

The EncryptedData shape (namespace ``http://www.w3.org/2001/04/xmlenc#``,
prefix ``xenc``):

    <xenc:EncryptedData Type="...">
      <xenc:EncryptionMethod Algorithm="...aes128-cbc"/>
      <ds:KeyInfo>
        <ds:KeyName>...</ds:KeyName>          (shared symmetric key)
        -- or --
        <xenc:EncryptedKey>...</xenc:EncryptedKey>   (RSA key transport)
      </ds:KeyInfo>
      <xenc:CipherData>
        <xenc:CipherValue>base64(IV || ciphertext)</xenc:CipherValue>
        -- or --
        <xenc:CipherReference URI="relative/path"/>
      </xenc:CipherData>
    </xenc:EncryptedData>

For an RSA recipient a fresh AES-128 content key is generated per call
and travels wrapped (RSA-OAEP) inside the EncryptedKey. The KeyInfo may
also be omitted entirely, in which case the caller must hand the content
key to ``decrypt`` out of band -- that is how the SOAP layer keeps
signature material hidden. Cipher references are resolved strictly
inside a caller-supplied base directory.

Fragments are encrypted inside a carrier element (reserved name
``xmlseal.fragment``) that records the namespace bindings in scope at
the extraction point. That keeps fragments parseable on their own and
lets decryption restore the original nodes exactly, without grafting
inherited declarations onto them. Payloads produced elsewhere, without
the carrier, decrypt fine too.

Integrity caveat: AES-CBC carries no authentication tag, so encryption
by itself does not guarantee integrity. A flipped ciphertext byte is
*detected* in practice -- it garbles the padding or the decrypted XML,
and decryption fails loudly rather than returning mangled content --
but that detection is best-effort, not cryptographic. Callers that need
integrity must pair encryption with a signature (see the SOAP layer).
"""

from __future__ import annotations

import base64
from pathlib import Path
from typing import Optional, Union

from . import tree
from ._rand import rand_hex
from .crypto import AES_KEY, KeyMaterial, Keystore, keygen, sym_decrypt, sym_encrypt, unwrap_key, wrap_key
from . import crypto
from .dsig import DSIG_NS
from .errors import (
    CipherReferenceNotFound,
    InputError,
    MalformedCiphertext,
    MalformedCipherPayload,
    NoEncryptedData,
    ReferenceOutsideBase,
    RootElementEncryptionUnsupported,
    TargetUnresolved,
    UnknownKey,
    UnsupportedAlgorithm,
)

XENC_NS = "http://www.w3.org/2001/04/xmlenc#"

TYPE_ELEMENT = XENC_NS + "Element"
TYPE_CONTENT = XENC_NS + "Content"
AES128_URI = XENC_NS + "aes128-cbc"
AES256_URI = XENC_NS + "aes256-cbc"
RSA_OAEP_URI = XENC_NS + "rsa-oaep-mgf1p"

_AES_URIS = {128: AES128_URI, 256: AES256_URI}
_AES_SIZES = {AES128_URI: 16, AES256_URI: 32}

ELEMENT_MODE = "element"
CONTENT_MODE = "content"

_CARRIER_NAME = "xmlseal.fragment"
_CARRIER_MARK = "carrier"


def _carrier_bytes(doc: tree.Document, path: tree.NodePath,
                   nodes: tuple[tree.Node, ...], include_self: bool) -> bytes:
    bindings = tree.inscope_bindings(doc, path, include_self)
    carrier = tree.Element(
        _CARRIER_NAME,
        attrs=(tree.Attr(_CARRIER_MARK, "1"),),
        nsdecls=tuple((p, u) for p, u in bindings.items() if u),
        children=nodes,
    )
    return tree.serialize_element(carrier)


def _fragment_nodes(plaintext: bytes) -> tuple[tree.Node, ...]:
    """Nodes carried by decrypted bytes, with or without our carrier."""
    if plaintext.startswith(b"<" + _CARRIER_NAME.encode()):
        root = tree.parse(plaintext).root
        if root.local == _CARRIER_NAME and root.get(_CARRIER_MARK) == "1":
            return root.children
        return (root,)
    wrapped = tree.parse(b"<x>" + plaintext + b"</x>")
    return wrapped.root.children


def _xe(local: str, attrs=(), children=(), declare: bool = False) -> tree.Element:
    nsdecls = (("xenc", XENC_NS),) if declare else ()
    return tree.Element(local, ns=XENC_NS, prefix="xenc",
                        attrs=tuple(attrs), nsdecls=nsdecls, children=tuple(children))


def _ds(local: str, attrs=(), children=(), declare: bool = False) -> tree.Element:
    nsdecls = (("ds", DSIG_NS),) if declare else ()
    return tree.Element(local, ns=DSIG_NS, prefix="ds",
                        attrs=tuple(attrs), nsdecls=nsdecls, children=tuple(children))


def _is_xenc(el: tree.Element, local: str) -> bool:
    return el.ns == XENC_NS and el.local == local


def build_encrypted_key(recipient: KeyMaterial, content_key: KeyMaterial,
                        *, recipient_attr: bool = False) -> tree.Element:
    """EncryptedKey carrying ``content_key`` wrapped for ``recipient``.

    With ``recipient_attr`` the recipient's name rides in a plain
    ``Recipient`` attribute instead of a nested ds:KeyInfo, keeping the
    element free of signature-namespace content.
    """
    wrapped = wrap_key(recipient, content_key)
    attrs = [tree.Attr("Recipient", recipient.name)] if recipient_attr else []
    children = [_xe("EncryptionMethod", attrs=(tree.Attr("Algorithm", RSA_OAEP_URI),))]
    if not recipient_attr:
        children.append(_ds("KeyInfo", declare=True, children=(
            _ds("KeyName", children=(tree.Text(recipient.name),)),)))
    children.append(_xe("CipherData", children=(
        _xe("CipherValue", children=(tree.Text(base64.b64encode(wrapped).decode()),)),)))
    return _xe("EncryptedKey", attrs=attrs, children=children, declare=recipient_attr)


def encrypt_element(
    doc: tree.Document,
    target: Union[str, tree.NodePath],
    mode: str,
    recipient: Optional[KeyMaterial] = None,
    *,
    content_key: Optional[KeyMaterial] = None,
    enc_id: Optional[str] = None,
) -> tree.Document:
    """Encrypt one element (or just its content) in place.

    ``target`` is an Id value or a node path. ``recipient`` is either an
    RSA key (hybrid: fresh AES-128 content key, wrapped) or a shared AES
    key (named via KeyName). Passing ``recipient=None`` with an explicit
    ``content_key`` emits no key information at all.
    """
    if mode not in (ELEMENT_MODE, CONTENT_MODE):
        raise InputError(f"mode must be {ELEMENT_MODE!r} or {CONTENT_MODE!r}, not {mode!r}")
    if isinstance(target, str):
        path = tree.path_by_id(doc, target)
        if path is None:
            raise TargetUnresolved(f"no element with Id {target!r}")
    else:
        path = target
    try:
        target_el = path.resolve(doc)
    except InputError:
        raise TargetUnresolved(f"path {path.indices} does not resolve") from None
    if mode == ELEMENT_MODE and path.is_root:
        raise RootElementEncryptionUnsupported(
            "element-mode encryption would leave the document without a root")

    key_info: Optional[tree.Element]
    if recipient is None:
        if content_key is None:
            raise InputError("either a recipient or an explicit content key is required")
        cek = content_key
        key_info = None
    elif recipient.kind == AES_KEY:
        cek = recipient
        key_info = _ds("KeyInfo", declare=True, children=(
            _ds("KeyName", children=(tree.Text(recipient.name),)),))
    else:
        cek = content_key if content_key is not None else keygen("aes", 128, "cek")
        key_info = _ds("KeyInfo", declare=True, children=(
            build_encrypted_key(recipient, cek),))

    if mode == ELEMENT_MODE:
        plaintext = _carrier_bytes(doc, path, (target_el,), include_self=False)
        type_uri = TYPE_ELEMENT
    else:
        plaintext = _carrier_bytes(doc, path, target_el.children, include_self=True)
        type_uri = TYPE_CONTENT

    blob = sym_encrypt(cek, plaintext)
    attrs = [tree.Attr("Type", type_uri)]
    if enc_id is not None:
        attrs.insert(0, tree.Attr("Id", enc_id))
    children = [_xe("EncryptionMethod", attrs=(tree.Attr("Algorithm", _AES_URIS[cek.bits]),))]
    if key_info is not None:
        children.append(key_info)
    children.append(_xe("CipherData", children=(
        _xe("CipherValue", children=(tree.Text(base64.b64encode(blob).decode()),)),)))
    enc_el = _xe("EncryptedData", attrs=attrs, children=children, declare=True)

    if mode == ELEMENT_MODE:
        return tree.splice_nodes(doc, path, (enc_el,))
    return tree.replace_element(doc, path, target_el.with_children((enc_el,)))


def resolve_cipher_reference(name: str, base_dir: Union[str, Path]) -> bytes:
    """Read cipher bytes from a file, confined to ``base_dir``."""
    base = Path(base_dir).resolve()
    candidate = (base / name).resolve()
    if not candidate.is_relative_to(base):
        raise ReferenceOutsideBase(f"cipher reference {name!r} escapes {base}")
    if not candidate.is_file():
        raise CipherReferenceNotFound(f"cipher reference {name!r} not found under {base}")
    return candidate.read_bytes()


def _b64_cipher(text: str) -> bytes:
    try:
        return base64.b64decode("".join(text.split()), validate=True)
    except (ValueError, TypeError):
        raise MalformedCiphertext("CipherValue is not valid base64") from None


def unwrap_encrypted_key(ek_el: tree.Element, keystore: Keystore) -> KeyMaterial:
    method = None
    for c in ek_el.child_elements():
        if _is_xenc(c, "EncryptionMethod"):
            method = c.get("Algorithm")
    if method != RSA_OAEP_URI:
        raise UnsupportedAlgorithm(f"key transport {method!r} is not supported")
    recipient_name = ek_el.get("Recipient")
    if recipient_name is None:
        for c in ek_el.child_elements():
            if c.ns == DSIG_NS and c.local == "KeyInfo":
                for kn in c.child_elements():
                    if kn.ns == DSIG_NS and kn.local == "KeyName":
                        recipient_name = kn.text_content().strip()
    if not recipient_name:
        raise UnknownKey("EncryptedKey does not say whom the key is wrapped for")
    wrapped = None
    for c in ek_el.child_elements():
        if _is_xenc(c, "CipherData"):
            for v in c.child_elements():
                if _is_xenc(v, "CipherValue"):
                    wrapped = _b64_cipher(v.text_content())
    if wrapped is None:
        raise MalformedCiphertext("EncryptedKey carries no CipherValue")
    private = keystore.resolve(recipient_name, crypto.RSA_PRIVATE)
    return unwrap_key(private, wrapped)


def _content_key_for(enc_el: tree.Element, keystore: Keystore,
                     default_key: Optional[KeyMaterial]) -> KeyMaterial:
    key_info = None
    for c in enc_el.child_elements():
        if c.ns == DSIG_NS and c.local == "KeyInfo":
            key_info = c
    if key_info is None:
        if default_key is None:
            raise UnknownKey("EncryptedData carries no key information and no "
                             "default content key was supplied")
        return default_key
    for c in key_info.child_elements():
        if c.ns == DSIG_NS and c.local == "KeyName":
            return keystore.resolve(c.text_content().strip(), AES_KEY)
        if _is_xenc(c, "EncryptedKey"):
            return unwrap_encrypted_key(c, keystore)
        raise UnsupportedAlgorithm(
            f"KeyInfo construct {c.local!r} is not supported for decryption")
    raise UnknownKey("KeyInfo is empty")


def _cipher_bytes(enc_el: tree.Element, cipher_base: Optional[Union[str, Path]]) -> bytes:
    cipher_data = None
    for c in enc_el.child_elements():
        if _is_xenc(c, "CipherData"):
            cipher_data = c
    if cipher_data is None:
        raise MalformedCiphertext("EncryptedData carries no CipherData")
    for c in cipher_data.child_elements():
        if _is_xenc(c, "CipherValue"):
            return _b64_cipher(c.text_content())
        if _is_xenc(c, "CipherReference"):
            uri = c.get("URI")
            if not uri:
                raise MalformedCiphertext("CipherReference lacks a URI")
            if cipher_base is None:
                raise CipherReferenceNotFound(
                    "document uses a cipher reference but no base directory was given")
            return resolve_cipher_reference(uri, cipher_base)
    raise MalformedCiphertext("CipherData holds neither CipherValue nor CipherReference")


def _decrypt_one(doc: tree.Document, path: tree.NodePath, enc_el: tree.Element,
                 keystore: Keystore, cipher_base, default_key) -> tree.Document:
    method = None
    for c in enc_el.child_elements():
        if _is_xenc(c, "EncryptionMethod"):
            method = c.get("Algorithm")
    if method not in _AES_SIZES:
        raise UnsupportedAlgorithm(f"encryption method {method!r} is not supported")
    cek = _content_key_for(enc_el, keystore, default_key)
    if cek.bits // 8 != _AES_SIZES[method]:
        raise UnknownKey(
            f"content key is {cek.bits} bits but the method expects "
            f"{_AES_SIZES[method] * 8}")
    plaintext = sym_decrypt(cek, _cipher_bytes(enc_el, cipher_base))
    try:
        nodes = _fragment_nodes(plaintext)
    except InputError as exc:
        raise MalformedCipherPayload(f"decrypted bytes do not parse as XML: {exc}") from None
    if enc_el.get("Type") == TYPE_ELEMENT:
        if len(nodes) != 1 or not isinstance(nodes[0], tree.Element):
            raise MalformedCipherPayload(
                "element-type payload must decrypt to exactly one element")
    return tree.splice_nodes(doc, path, nodes)


def decrypt(
    doc: tree.Document,
    keystore: Keystore,
    *,
    cipher_base: Optional[Union[str, Path]] = None,
    default_key: Optional[KeyMaterial] = None,
) -> tree.Document:
    """Decrypt every EncryptedData in the document, innermost first.

    Each decrypted fragment is spliced back where the EncryptedData
    stood. ``default_key`` serves EncryptedData elements that carry no
    key information of their own.
    """
    rounds = 0
    while True:
        encrypted = [(p, el) for p, el in tree.walk(doc) if _is_xenc(el, "EncryptedData")]
        if not encrypted:
            if rounds == 0:
                raise NoEncryptedData("document carries no EncryptedData element")
            return doc
        # innermost first: an entry with no other EncryptedData below it
        for path, el in encrypted:
            if not any(p is not path and p.is_within(path) for p, _ in encrypted):
                doc = _decrypt_one(doc, path, el, keystore, cipher_base, default_key)
                break
        rounds += 1
