"""Deterministic byte form of a node, the input to digesting and signing.

This is a simplified canonical form, not W3C Canonical XML, although the
algorithm identifier kept on the wire is the familiar W3C one. The rules:

* comments are omitted;
* every element is rendered as a start/end tag pair, even when empty;
* namespace declarations come first, sorted by prefix (default first),
  then attributes sorted by (namespace-uri, local-name);
* element and attribute names are emitted with the document's own
  prefixes; no prefix rewriting and no inheritance of declarations from
  outside the canonicalized subtree;
* text escapes ``&`` ``<`` ``>``; attribute values escape ``&`` ``<``
  ``"`` and tab, LF, CR as character references;
* line endings are normalized to LF; whitespace is otherwise untouched.

A subtree may be canonicalized on its own, and one inner subtree may be
excluded (that is how a document is digested without the signature it
carries); the excluded subtree contributes zero bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import tree
from .errors import MalformedXml, PathUnresolved

ALGORITHM_ID = "http://www.w3.org/TR/2001/REC-xml-c14n-20010315"


@dataclass(frozen=True)
class CanonicalForm:
    bytes: bytes
    algorithm_id: str = ALGORITHM_ID


def _normalize_eol(value: str) -> str:
    return value.replace("\r\n", "\n").replace("\r", "\n")


def _c14n_text(value: str) -> str:
    value = _normalize_eol(value)
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _c14n_attr_value(value: str) -> str:
    value = _normalize_eol(value)
    value = value.replace("&", "&amp;").replace("<", "&lt;").replace('"', "&quot;")
    return value.replace("\t", "&#x9;").replace("\n", "&#xA;").replace("\r", "&#xD;")


def _name(prefix_hint: Optional[str], ns: Optional[str], scopes, for_attr: bool, local: str) -> str:
    if ns is None:
        return local
    if prefix_hint is not None:
        return f"{prefix_hint}:{local}"
    prefix = tree.resolve_prefix(None, ns, scopes, for_attr=for_attr)
    return f"{prefix}:{local}" if prefix else local


def _render(el: tree.Element, path: tuple[int, ...], exclude: Optional[tuple[int, ...]],
            out: list[str], scopes: list) -> None:
    if path == exclude:
        return
    scopes.append({p: u for p, u in el.nsdecls})
    try:
        tag = _name(el.prefix, el.ns, scopes, False, el.local)
        out.append(f"<{tag}")
        for p, u in sorted(el.nsdecls, key=lambda d: d[0] or ""):
            name = "xmlns" if p is None else f"xmlns:{p}"
            out.append(f' {name}="{_c14n_attr_value(u)}"')
        for a in sorted(el.attrs, key=lambda a: (a.ns or "", a.local)):
            aname = _name(a.prefix, a.ns, scopes, True, a.local)
            out.append(f' {aname}="{_c14n_attr_value(a.value)}"')
        out.append(">")
        for i, child in enumerate(el.children):
            if isinstance(child, tree.Element):
                _render(child, path + (i,), exclude, out, scopes)
            elif isinstance(child, tree.Text):
                out.append(_c14n_text(child.value))
            # comments contribute nothing
        out.append(f"</{tag}>")
    finally:
        scopes.pop()


def canonicalize(
    doc: tree.Document,
    subtree: Optional[tree.NodePath] = None,
    exclude: Optional[tree.NodePath] = None,
) -> CanonicalForm:
    """Canonical bytes of ``subtree`` (whole document when None).

    ``exclude`` names one element inside the subtree whose entire
    content is left out of the byte stream.
    """
    start = subtree if subtree is not None else tree.NodePath()
    root_el = start.resolve(doc)
    exclude_ix: Optional[tuple[int, ...]] = None
    if exclude is not None:
        exclude.resolve(doc)
        if not exclude.is_within(start):
            raise PathUnresolved("excluded subtree lies outside the canonicalized subtree")
        exclude_ix = exclude.indices
    out: list[str] = []
    _render(root_el, start.indices, exclude_ix, out, [])
    return CanonicalForm("".join(out).encode("utf-8"))


def canonical_element_bytes(el: tree.Element) -> bytes:
    """Canonical bytes of a standalone element (no document context)."""
    out: list[str] = []
    _render(el, (), None, out, [])
    return "".join(out).encode("utf-8")
