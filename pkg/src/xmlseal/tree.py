"""Namespace-aware XML tree: parse, navigate, mutate, serialize.

The accepted XML subset is deliberately narrow: elements, attributes,
namespace declarations, character data and comments. Everything else --
DTDs, processing instructions, external entities -- is rejected at parse
time, which removes the classic entity-expansion and injection surface.
CDATA sections are accepted but normalized to plain text.

All node types are immutable values. Mutation operations return a new
``Document`` and never touch their input, so trees can be shared freely.
Structural equality (``==``) ignores attribute order, namespace
declaration order and prefix spelling, but not child order; that matches
what canonicalization treats as significant.

Elements are addressed either by ``Id`` attribute (plain ``Id`` or
``wsu:Id`` in the WS-Security utility namespace; values must be unique
per document) or by ``NodePath``, a sequence of child indices from the
root.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace as _dc_replace
from typing import Iterator, Optional, Union
from xml.parsers import expat

from .errors import (
    BadEncoding,
    DuplicateId,
    ForbiddenConstruct,
    MalformedXml,
    PathUnresolved,
)

XML_NS = "http://www.w3.org/XML/1998/namespace"
WSU_NS = "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-utility-1.0.xsd"

# Pragmatic NCName: a name without a colon. Covers the usual ASCII and
# unicode-letter cases; full XML 1.0 name classes are a non-goal.
_NCNAME = re.compile(r"^[^\d\W][\w.\-]*$", re.UNICODE)


def _check_ncname(name: str, what: str) -> None:
    if not _NCNAME.match(name):
        raise MalformedXml(f"{what} {name!r} is not a valid NCName")


@dataclass(frozen=True)
class Attr:
    """One attribute: (namespace-uri, local-name, value).

    ``prefix`` is a serialization hint only; it never participates in
    structural equality.
    """

    local: str
    value: str
    ns: Optional[str] = None
    prefix: Optional[str] = None

    def key(self) -> tuple:
        return (self.ns or "", self.local, self.value)


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Comment:
    value: str


Node = Union["Element", Text, Comment]


@dataclass(frozen=True, eq=False)
class Element:
    """An element node with attributes, namespace declarations, children.

    ``nsdecls`` holds the declarations written on this element as
    ``(prefix, uri)`` pairs, ``(None, uri)`` for the default namespace
    and ``(None, "")`` for an un-declaration. ``prefix`` is this
    element's own serialization hint.
    """

    local: str
    ns: Optional[str] = None
    attrs: tuple[Attr, ...] = ()
    nsdecls: tuple[tuple[Optional[str], str], ...] = ()
    children: tuple[Node, ...] = ()
    prefix: Optional[str] = None

    def __post_init__(self):
        _check_ncname(self.local, "element name")
        object.__setattr__(self, "attrs", tuple(self.attrs))
        object.__setattr__(self, "nsdecls", tuple(self.nsdecls))
        object.__setattr__(self, "children", _coalesce(self.children))
        seen = set()
        id_count = 0
        for a in self.attrs:
            _check_ncname(a.local, "attribute name")
            if (a.ns, a.local) in seen:
                raise MalformedXml(
                    f"duplicate attribute ({a.ns!r}, {a.local!r}) on <{self.local}>")
            seen.add((a.ns, a.local))
            if _is_id_attr(a):
                id_count += 1
        if id_count > 1:
            raise DuplicateId(f"element <{self.local}> carries more than one Id attribute")

    # -- structural equality (order-insensitive for attrs and nsdecls) --

    def _key(self) -> tuple:
        return (
            self.ns,
            self.local,
            frozenset(a.key() for a in self.attrs),
            frozenset(self.nsdecls),
            self.children,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Element):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    # -- convenience accessors ------------------------------------------

    def get(self, local: str, ns: Optional[str] = None) -> Optional[str]:
        """Value of attribute (ns, local), or None."""
        for a in self.attrs:
            if a.local == local and a.ns == ns:
                return a.value
        return None

    def id_value(self) -> Optional[str]:
        """Value of the recognized Id attribute, if any."""
        for a in self.attrs:
            if _is_id_attr(a):
                return a.value
        return None

    def child_elements(self) -> tuple["Element", ...]:
        return tuple(c for c in self.children if isinstance(c, Element))

    def text_content(self) -> str:
        """Concatenated text of all descendant text nodes."""
        parts = []
        for c in self.children:
            if isinstance(c, Text):
                parts.append(c.value)
            elif isinstance(c, Element):
                parts.append(c.text_content())
        return "".join(parts)

    def with_children(self, children) -> "Element":
        return _dc_replace(self, children=tuple(children))

    def with_attrs(self, attrs) -> "Element":
        return _dc_replace(self, attrs=tuple(attrs))


def _is_id_attr(a: Attr) -> bool:
    return a.local == "Id" and (a.ns is None or a.ns == WSU_NS)


def _coalesce(children) -> tuple[Node, ...]:
    """Merge adjacent text nodes and drop empty ones."""
    out: list[Node] = []
    for c in children:
        if isinstance(c, Text):
            if not c.value:
                continue
            if out and isinstance(out[-1], Text):
                out[-1] = Text(out[-1].value + c.value)
                continue
        out.append(c)
    return tuple(out)


@dataclass(frozen=True)
class Document:
    """A parsed document: exactly one root element, UTF-8 throughout.

    Construction verifies that Id values are unique across the tree.
    """

    root: Element

    def __post_init__(self):
        collect_ids(self)  # raises DuplicateId on conflict


@dataclass(frozen=True)
class NodePath:
    """Child indices from the root; the empty path is the root itself."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(self.indices))

    def child(self, index: int) -> "NodePath":
        return NodePath(self.indices + (index,))

    def parent(self) -> "NodePath":
        if not self.indices:
            raise PathUnresolved("the root path has no parent")
        return NodePath(self.indices[:-1])

    @property
    def is_root(self) -> bool:
        return not self.indices

    def resolve(self, doc: Document) -> Element:
        """The element this path addresses, or PathUnresolved."""
        node: Node = doc.root
        for i in self.indices:
            if not isinstance(node, Element) or not 0 <= i < len(node.children):
                raise PathUnresolved(f"path {self.indices} does not resolve")
            node = node.children[i]
        if not isinstance(node, Element):
            raise PathUnresolved(f"path {self.indices} addresses a non-element node")
        return node

    def is_within(self, other: "NodePath") -> bool:
        """True if this path equals or descends from ``other``."""
        return self.indices[: len(other.indices)] == other.indices


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

class _Frame:
    __slots__ = ("local", "ns", "prefix", "attrs", "nsdecls", "children")

    def __init__(self, local, ns, prefix, attrs, nsdecls):
        self.local = local
        self.ns = ns
        self.prefix = prefix
        self.attrs = attrs
        self.nsdecls = nsdecls
        self.children: list[Node] = []


class _Builder:
    def __init__(self):
        self.stack: list[_Frame] = []
        self.scopes: list[dict[Optional[str], str]] = [{"xml": XML_NS}]
        self.root: Optional[Element] = None

    def _lookup(self, prefix: Optional[str]) -> Optional[str]:
        for scope in reversed(self.scopes):
            if prefix in scope:
                return scope[prefix] or None
        return None if prefix is None else _fail_prefix(prefix)

    def start(self, name: str, raw_attrs: list[str]) -> None:
        decls: list[tuple[Optional[str], str]] = []
        plain: list[tuple[str, str]] = []
        for i in range(0, len(raw_attrs), 2):
            aname, avalue = raw_attrs[i], raw_attrs[i + 1]
            if aname == "xmlns":
                decls.append((None, avalue))
            elif aname.startswith("xmlns:"):
                prefix = aname[6:]
                _check_ncname(prefix, "namespace prefix")
                if not avalue:
                    raise MalformedXml(f"prefix {prefix!r} cannot be bound to an empty URI")
                decls.append((prefix, avalue))
            else:
                plain.append((aname, avalue))
        self.scopes.append({p: u for p, u in decls})

        eprefix, elocal = _split_qname(name)
        ens = self._lookup(eprefix)
        attrs = []
        for aname, avalue in plain:
            aprefix, alocal = _split_qname(aname)
            ans = self._lookup(aprefix) if aprefix is not None else None
            attrs.append(Attr(alocal, avalue, ns=ans, prefix=aprefix))
        self.stack.append(_Frame(elocal, ens, eprefix, attrs, decls))

    def end(self, _name: str) -> None:
        frame = self.stack.pop()
        self.scopes.pop()
        el = Element(
            local=frame.local,
            ns=frame.ns,
            attrs=tuple(frame.attrs),
            nsdecls=tuple(frame.nsdecls),
            children=tuple(frame.children),
            prefix=frame.prefix,
        )
        if self.stack:
            self.stack[-1].children.append(el)
        else:
            self.root = el

    def text(self, data: str) -> None:
        if self.stack:
            self.stack[-1].children.append(Text(data))
        elif data.strip():
            raise MalformedXml("character data outside the root element")

    def comment(self, data: str) -> None:
        if self.stack:
            self.stack[-1].children.append(Comment(data))
        # comments outside the root are dropped


def _fail_prefix(prefix: str):
    raise MalformedXml(f"undeclared namespace prefix {prefix!r}")


def _split_qname(name: str) -> tuple[Optional[str], str]:
    if ":" not in name:
        return None, name
    prefix, _, local = name.partition(":")
    if not prefix or ":" in local or not local:
        raise MalformedXml(f"bad qualified name {name!r}")
    return prefix, local


def _reject_doctype(*_args):
    raise ForbiddenConstruct("DTD declarations are not accepted")


def _reject_pi(target, _data):
    raise ForbiddenConstruct(f"processing instruction <?{target}?> is not accepted")


def _reject_external_entity(*_args):
    raise ForbiddenConstruct("external entity references are not accepted")


def _check_xml_decl(_version, encoding, _standalone):
    if encoding is not None and encoding.lower() not in ("utf-8", "us-ascii"):
        raise BadEncoding(f"declared encoding {encoding!r}; only UTF-8 is accepted")


def parse(data: bytes) -> Document:
    """Parse UTF-8 XML bytes into a Document.

    Raises MalformedXml, DuplicateId, ForbiddenConstruct or BadEncoding.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise BadEncoding(f"input is not valid UTF-8: {e}") from None

    builder = _Builder()
    parser = expat.ParserCreate()
    parser.ordered_attributes = True
    parser.buffer_text = True
    parser.StartElementHandler = builder.start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.text
    parser.CommentHandler = builder.comment
    parser.StartDoctypeDeclHandler = _reject_doctype
    parser.EntityDeclHandler = _reject_doctype
    parser.ProcessingInstructionHandler = _reject_pi
    parser.ExternalEntityRefHandler = _reject_external_entity
    parser.XmlDeclHandler = _check_xml_decl
    try:
        parser.Parse(data, True)
    except expat.ExpatError as e:
        raise MalformedXml(str(e)) from None
    if builder.root is None:
        raise MalformedXml("no root element")
    return Document(builder.root)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_XML_DECL = b'<?xml version="1.0" encoding="UTF-8"?>\n'


def escape_text(value: str) -> str:
    value = value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    return value.replace("\r", "&#xD;")


def escape_attr(value: str) -> str:
    value = value.replace("&", "&amp;").replace("<", "&lt;").replace('"', "&quot;")
    return value.replace("\t", "&#x9;").replace("\n", "&#xA;").replace("\r", "&#xD;")


def _decl_attr(prefix: Optional[str], uri: str) -> str:
    name = "xmlns" if prefix is None else f"xmlns:{prefix}"
    return f' {name}="{escape_attr(uri)}"'


def resolve_prefix(
    node_prefix: Optional[str],
    ns: Optional[str],
    scopes: list[dict[Optional[str], str]],
    for_attr: bool,
) -> Optional[str]:
    """Pick the prefix to serialize a name with.

    The node's own hint wins when it is still bound to the right URI;
    otherwise the innermost matching declaration is used (lexicographic
    tie-break). Attributes never use the default namespace.
    """
    def visible(prefix):
        for scope in reversed(scopes):
            if prefix in scope:
                return scope[prefix] or None
        return XML_NS if prefix == "xml" else None

    if ns is None:
        return None
    if node_prefix is not None and visible(node_prefix) == ns:
        return node_prefix
    if not for_attr and visible(None) == ns:
        return None
    candidates = set()
    for scope in scopes:
        for p in scope:
            if p is not None and visible(p) == ns:
                candidates.add(p)
    if ns == XML_NS:
        candidates.add("xml")
    if candidates:
        return min(candidates)
    raise MalformedXml(
        f"no namespace declaration in scope for {ns!r}; "
        "declare it on the element or an ancestor")


def _write_element(el: Element, out: list[str], scopes: list) -> None:
    scopes.append({p: u for p, u in el.nsdecls})
    prefix = resolve_prefix(el.prefix, el.ns, scopes, for_attr=False)
    tag = f"{prefix}:{el.local}" if prefix else el.local
    out.append(f"<{tag}")
    for p, u in el.nsdecls:
        out.append(_decl_attr(p, u))
    for a in el.attrs:
        ap = resolve_prefix(a.prefix, a.ns, scopes, for_attr=True)
        aname = f"{ap}:{a.local}" if ap else a.local
        out.append(f' {aname}="{escape_attr(a.value)}"')
    if not el.children:
        out.append("/>")
        scopes.pop()
        return
    out.append(">")
    for c in el.children:
        if isinstance(c, Element):
            _write_element(c, out, scopes)
        elif isinstance(c, Text):
            out.append(escape_text(c.value))
        else:
            out.append(f"<!--{c.value}-->")
    out.append(f"</{tag}>")
    scopes.pop()


def serialize_element(el: Element) -> bytes:
    """Serialize a single element (no XML declaration)."""
    out: list[str] = []
    _write_element(el, out, [])
    return "".join(out).encode("utf-8")


def serialize_nodes(nodes: tuple[Node, ...]) -> bytes:
    """Serialize a node sequence exactly as it would appear inside a parent."""
    out: list[str] = []
    for n in nodes:
        if isinstance(n, Element):
            _write_element(n, out, [])
        elif isinstance(n, Text):
            out.append(escape_text(n.value))
        else:
            out.append(f"<!--{n.value}-->")
    return "".join(out).encode("utf-8")


def serialize(doc: Document) -> bytes:
    """Serialize a Document to UTF-8 bytes; parse(serialize(d)) == d."""
    return _XML_DECL + serialize_element(doc.root)


# ---------------------------------------------------------------------------
# navigation and pure mutation
# ---------------------------------------------------------------------------

def walk(doc: Document) -> Iterator[tuple[NodePath, Element]]:
    """All elements in document order with their paths."""
    def rec(el: Element, path: tuple[int, ...]):
        yield NodePath(path), el
        for i, c in enumerate(el.children):
            if isinstance(c, Element):
                yield from rec(c, path + (i,))
    yield from rec(doc.root, ())


def inscope_bindings(doc: Document, path: NodePath,
                     include_self: bool = True) -> dict[Optional[str], str]:
    """Namespace bindings visible at ``path``, inner declarations winning."""
    chain = [doc.root]
    node: Node = doc.root
    for i in path.indices:
        assert isinstance(node, Element)
        node = node.children[i]
        chain.append(node)
    if not include_self:
        chain = chain[:-1]
    merged: dict[Optional[str], str] = {}
    for el in chain:
        if isinstance(el, Element):
            for p, u in el.nsdecls:
                merged[p] = u
    return merged


def collect_ids(doc: Document) -> dict[str, NodePath]:
    """Map every Id value to its element path; DuplicateId on conflict."""
    ids: dict[str, NodePath] = {}
    for path, el in walk(doc):
        value = el.id_value()
        if value is None:
            continue
        if value in ids:
            raise DuplicateId(f"Id {value!r} appears more than once")
        ids[value] = path
    return ids


def find_by_id(doc: Document, id_value: str) -> Optional[Element]:
    path = path_by_id(doc, id_value)
    return path.resolve(doc) if path is not None else None


def path_by_id(doc: Document, id_value: str) -> Optional[NodePath]:
    for path, el in walk(doc):
        if el.id_value() == id_value:
            return path
    return None


def replace_element(doc: Document, at: NodePath, with_el: Element) -> Document:
    """New document with the element at ``at`` swapped for ``with_el``."""
    at.resolve(doc)  # PathUnresolved if stale
    return Document(_rebuild(doc.root, at.indices, with_el))


def _rebuild(el: Element, indices: tuple[int, ...], new_node: Element) -> Element:
    if not indices:
        return new_node
    i, rest = indices[0], indices[1:]
    child = el.children[i]
    assert isinstance(child, Element)
    new_children = el.children[:i] + (_rebuild(child, rest, new_node),) + el.children[i + 1:]
    return el.with_children(new_children)


def insert_child(
    doc: Document, at: NodePath, element: Element, index: Optional[int] = None
) -> Document:
    """New document with ``element`` inserted under the element at ``at``.

    ``index=None`` appends; otherwise 0 <= index <= len(children).
    """
    parent = at.resolve(doc)
    n = len(parent.children)
    if index is None:
        index = n
    if not 0 <= index <= n:
        raise PathUnresolved(f"insert index {index} out of range 0..{n}")
    new_parent = parent.with_children(
        parent.children[:index] + (element,) + parent.children[index:])
    return replace_element(doc, at, new_parent)


def remove_child(doc: Document, at: NodePath, index: int) -> Document:
    """New document with child ``index`` of the element at ``at`` removed."""
    parent = at.resolve(doc)
    if not 0 <= index < len(parent.children):
        raise PathUnresolved(
            f"remove index {index} out of range for {len(parent.children)} children")
    new_parent = parent.with_children(
        parent.children[:index] + parent.children[index + 1:])
    return replace_element(doc, at, new_parent)


def splice_nodes(doc: Document, at: NodePath, nodes: tuple[Node, ...]) -> Document:
    """Replace the element at ``at`` with an arbitrary node sequence.

    The root can only be replaced by exactly one element.
    """
    at.resolve(doc)
    if at.is_root:
        elements = [n for n in nodes if isinstance(n, Element)]
        if len(elements) != 1 or len(nodes) != 1:
            raise PathUnresolved("the root element can only be replaced by one element")
        return Document(elements[0])
    parent_path = at.parent()
    parent = parent_path.resolve(doc)
    i = at.indices[-1]
    new_parent = parent.with_children(parent.children[:i] + tuple(nodes) + parent.children[i + 1:])
    return replace_element(doc, parent_path, new_parent)
