"""xmlseal: sign, verify, encrypt and decrypt XML documents.

Signatures come in the three classic topologies (enveloped, enveloping,
detached), encryption replaces elements or their content with
EncryptedData, and the SOAP layer composes both in either order under a
WS-Security-style header. See the individual modules for the wire
formats; the README covers the deliberate deviations from the full W3C
processing models.
"""

from . import c14n, cli, crypto, dsig, enc, errors, tree, wsse
from .c14n import CanonicalForm, canonicalize
from .crypto import DigestAlg, KeyMaterial, Keystore, keygen, load_keystore, save_key
from .dsig import (
    VerificationReport,
    extract_payload,
    sign_detached,
    sign_enveloped,
    sign_enveloping,
    verify,
)
from .enc import decrypt, encrypt_element
from .errors import InputError, SecurityFailure, XmlsealError
from .tree import Attr, Comment, Document, Element, NodePath, Text, parse, serialize
from .wsse import SoapEnvelope, protect, unprotect, wrap_soap

__version__ = "0.1.0"

__all__ = [
    "Attr", "CanonicalForm", "Comment", "DigestAlg", "Document", "Element",
    "InputError", "KeyMaterial", "Keystore", "NodePath", "SecurityFailure",
    "SoapEnvelope", "Text", "VerificationReport", "XmlsealError",
    "c14n", "canonicalize", "cli", "crypto", "decrypt", "dsig",
    "enc", "encrypt_element", "errors", "extract_payload", "keygen",
    "load_keystore", "parse", "protect", "save_key", "serialize",
    "sign_detached", "sign_enveloped", "sign_enveloping", "tree",
    "unprotect", "verify", "wrap_soap", "wsse",
]
