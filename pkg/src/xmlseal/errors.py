"""Exception hierarchy shared by all xmlseal modules.

Two families matter to callers (and to the CLI exit-code mapping):

* ``InputError`` -- the request itself was unusable: unparseable XML,
  a forbidden construct, a bad key file, an unresolvable target.
* ``SecurityFailure`` -- the inputs were well-formed but the
  cryptographic outcome is negative: a signature that does not verify,
  ciphertext that does not decrypt, a key that is not available.
"""


class XmlsealError(Exception):
    """Base class for every error raised by this package."""


class InputError(XmlsealError):
    """Malformed or unusable input (CLI exit status 2)."""


class SecurityFailure(XmlsealError):
    """Negative cryptographic outcome (CLI exit status 1)."""


# --- XML parsing / tree manipulation -----------------------------------

class MalformedXml(InputError):
    """Input is not well-formed XML within the accepted subset."""


class DuplicateId(InputError):
    """Two elements carry the same Id value, or one element carries two."""


class ForbiddenConstruct(InputError):
    """DTD, processing instruction or external entity in the input."""


class BadEncoding(InputError):
    """Input is not UTF-8, or declares a different encoding."""


class PathUnresolved(InputError):
    """A node path does not resolve to an element in this document."""


# --- keys and primitives ------------------------------------------------

class WrongKeyKind(InputError):
    """Operation applied to a key of the wrong kind."""


class UnknownKey(SecurityFailure):
    """The keystore has no key under the requested name."""


class KindMismatch(SecurityFailure):
    """The keystore holds the name, but not with the requested kind."""


class BadKeyFile(InputError):
    """A key file in the keystore directory could not be loaded."""


class UnsupportedAlgorithm(InputError):
    """Algorithm identifier outside the supported set."""


class MalformedCiphertext(InputError):
    """Ciphertext too short or not block-aligned."""


class PaddingOrKeyError(SecurityFailure):
    """Decryption produced invalid padding (wrong key or corrupt data)."""


class UnwrapFailed(SecurityFailure):
    """Key transport unwrap failed (wrong private key or corrupt blob)."""


# --- signatures ---------------------------------------------------------

class NoSignatureFound(SecurityFailure):
    """Document carries no signature element."""


class MultipleSignatures(SecurityFailure):
    """Document carries more than one signature element."""


class MalformedSignatureBlock(SecurityFailure):
    """Signature element present but structurally unusable."""


class DetachedTargetMissing(InputError):
    """Signature references a detached target but none was supplied."""


class EmptyTargetName(InputError):
    """Detached signing requires a non-empty target name."""


# --- encryption ---------------------------------------------------------

class TargetUnresolved(InputError):
    """Encryption target id or path does not resolve."""


class RootElementEncryptionUnsupported(InputError):
    """Element-mode encryption cannot replace the document root."""


class NoEncryptedData(InputError):
    """Decrypt called on a document with nothing to decrypt."""


class MalformedCipherPayload(SecurityFailure):
    """Decrypted bytes do not parse back into XML nodes."""


class ReferenceOutsideBase(InputError):
    """Cipher reference escapes the allowed base directory."""


class CipherReferenceNotFound(InputError):
    """Cipher reference names a file that does not exist."""


# --- SOAP protection ----------------------------------------------------

class NotSoapEnvelope(InputError):
    """Document is not a SOAP envelope with exactly one Body."""


class AlreadyProtected(InputError):
    """Envelope already carries a Security header."""


class NotProtected(SecurityFailure):
    """Envelope carries no security material to remove."""


class InvalidSignature(SecurityFailure):
    """Envelope signature did not verify; carries the full report."""

    def __init__(self, message, report=None, order=None):
        super().__init__(message)
        self.report = report
        self.order = order
