"""Command-line interface. File in, file out, exit status tells the truth.

Exit statuses: 0 success (and, for verify-like commands, a valid
report); 1 semantic security failure (invalid signature, failed
decryption, unknown key); 2 usage, IO or format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import c14n, crypto, dsig, enc, tree, wsse
from .dsig import VerificationReport
from .errors import InputError, InvalidSignature, KindMismatch, SecurityFailure, XmlsealError


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _write(path: str, data: bytes) -> None:
    Path(path).write_bytes(data)


def _load_doc(path: str) -> tree.Document:
    return tree.parse(_read(path))


def _print_report(report: VerificationReport, fmt: str,
                  order: Optional[str] = None) -> None:
    if fmt == "json":
        payload = report.to_dict()
        if order is not None:
            payload["order"] = order
        print(json.dumps(payload, indent=2))
        return
    print(f"overall: {report.overall}")
    if order is not None:
        print(f"order: {order}")
    print(f"signature: {'ok' if report.signature_ok else 'FAILED'} (key {report.key_used})")
    for ref in report.references:
        print(f"reference {ref.uri!r}: digest {'ok' if ref.digest_ok else 'MISMATCH'}")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_keygen(args) -> int:
    key = crypto.keygen(args.kind, args.bits, args.name)
    path = crypto.save_key(key, args.keystore)
    print(f"wrote {path}")
    return 0


def _cmd_sign(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    signer = keystore.resolve(args.key, crypto.RSA_PRIVATE)
    if args.mode == "detached":
        target_file = args.target if args.target else args.in_file
        signed = dsig.sign_detached(
            _read(target_file), Path(target_file).name, signer, args.key)
    else:
        if args.target:
            raise InputError("--target only applies to detached mode")
        if args.mode == "enveloped":
            signed = dsig.sign_enveloped(_load_doc(args.in_file), signer, args.key)
        else:
            signed = dsig.sign_enveloping(_load_doc(args.in_file).root, signer, args.key)
    _write(args.out, tree.serialize(signed))
    return 0


def _cmd_verify(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    detached = _read(args.target) if args.target else None
    report = dsig.verify(
        _load_doc(args.in_file), keystore,
        detached_target=detached,
        trust_embedded_keys=args.trust_embedded_keys)
    _print_report(report, args.report)
    return 0 if report.valid else 1


def _cmd_encrypt(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    try:
        recipient = keystore.resolve(args.recipient, crypto.RSA_PUBLIC)
    except KindMismatch:
        recipient = keystore.resolve(args.recipient, crypto.AES_KEY)
    encrypted = enc.encrypt_element(
        _load_doc(args.in_file), args.target_id, args.mode, recipient)
    _write(args.out, tree.serialize(encrypted))
    return 0


def _cmd_decrypt(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    decrypted = enc.decrypt(
        _load_doc(args.in_file), keystore,
        cipher_base=Path(args.in_file).resolve().parent)
    _write(args.out, tree.serialize(decrypted))
    return 0


def _cmd_c14n(args) -> int:
    doc = _load_doc(args.in_file)
    subtree = None
    if args.subtree_id:
        subtree = tree.path_by_id(doc, args.subtree_id)
        if subtree is None:
            raise InputError(f"no element with Id {args.subtree_id!r}")
    sys.stdout.buffer.write(c14n.canonicalize(doc, subtree=subtree).bytes)
    sys.stdout.buffer.flush()
    return 0


def _cmd_soap_secure(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    signer = keystore.resolve(args.signer, crypto.RSA_PRIVATE)
    recipient = keystore.resolve(args.recipient, crypto.RSA_PUBLIC)
    doc = _load_doc(args.in_file)
    env = wsse.SoapEnvelope(doc) if wsse.is_soap_envelope(doc) else wsse.wrap_soap(doc.root)
    protected = wsse.protect(env, args.order, signer, recipient)
    _write(args.out, protected.serialize())
    return 0


def _cmd_soap_open(args) -> int:
    keystore = crypto.load_keystore(args.keystore)
    env = wsse.SoapEnvelope(_load_doc(args.in_file))
    try:
        restored, report, order = wsse.unprotect(env, keystore)
    except InvalidSignature as exc:
        if exc.report is not None:
            _print_report(exc.report, args.report, order=exc.order)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write(args.out, restored.serialize())
    _print_report(report, args.report, order=order)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_keystore(p: argparse.ArgumentParser) -> None:
    p.add_argument("--keystore", required=True, help="directory holding key files")


def _add_in(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="in_file", required=True, metavar="FILE")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, metavar="FILE")


def _add_report(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", choices=("json", "text"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmlseal",
        description="Sign, verify, encrypt and decrypt XML documents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key into a keystore directory")
    p.add_argument("--kind", choices=("rsa", "aes"), required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--name", required=True)
    _add_keystore(p)
    p.set_defaults(func=_cmd_keygen)

    p = sub.add_parser("sign", help="sign a document or external file")
    p.add_argument("--mode", choices=("enveloped", "enveloping", "detached"),
                   required=True)
    p.add_argument("--key", required=True, help="signing key name")
    _add_keystore(p)
    _add_in(p)
    p.add_argument("--target", metavar="FILE",
                   help="detached mode: file to sign (defaults to --in)")
    _add_out(p)
    p.set_defaults(func=_cmd_sign)

    p = sub.add_parser("verify", help="verify a signed document")
    _add_keystore(p)
    _add_in(p)
    p.add_argument("--target", metavar="FILE",
                   help="bytes a detached signature refers to")
    p.add_argument("--trust-embedded-keys", action="store_true")
    _add_report(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("encrypt", help="encrypt one element by Id")
    p.add_argument("--target-id", required=True, metavar="ID")
    p.add_argument("--mode", choices=("element", "content"), required=True)
    p.add_argument("--recipient", required=True, help="recipient key name")
    _add_keystore(p)
    _add_in(p)
    _add_out(p)
    p.set_defaults(func=_cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt every EncryptedData element")
    _add_keystore(p)
    _add_in(p)
    _add_out(p)
    p.set_defaults(func=_cmd_decrypt)

    p = sub.add_parser("c14n", help="print canonical bytes to stdout")
    _add_in(p)
    p.add_argument("--subtree-id", metavar="ID")
    p.set_defaults(func=_cmd_c14n)

    p = sub.add_parser("soap-secure", help="protect a SOAP envelope (or bare payload)")
    p.add_argument("--order", choices=wsse.ORDERS, required=True)
    p.add_argument("--signer", required=True, help="sender's private key name")
    p.add_argument("--recipient", required=True, help="reader's public key name")
    _add_keystore(p)
    _add_in(p)
    _add_out(p)
    p.set_defaults(func=_cmd_soap_secure)

    p = sub.add_parser("soap-open", help="verify, decrypt and strip protection")
    _add_keystore(p)
    _add_in(p)
    _add_out(p)
    _add_report(p)
    p.set_defaults(func=_cmd_soap_open)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already printed
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SecurityFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (XmlsealError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
