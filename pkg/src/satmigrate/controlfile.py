"""Parsing of Debian-style ``Packages`` stanzas and dependency expressions.

Version strings follow the classic dpkg shape ``[epoch:]upstream[-revision]``
and are ordered by the alternating non-digit/digit run comparison with ``~``
sorting before everything, including the end of a run.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

RELATIONS = ("<<", "<=", "=", ">=", ">>")
ANY = "any"

_VERSION_CHARS = frozenset("0123456789abcdefghijklmnopqrstuvwxyz"
                           "ABCDEFGHIJKLMNOPQRSTUVWXYZ.+~-")
_NAME_FORBIDDEN = frozenset(" \t,|()/")


class ControlFileError(Exception):
    """Base class for control-file and grammar errors."""


class MissingField(ControlFileError):
    def __init__(self, field_name: str, stanza_index: int):
        super().__init__(f"stanza {stanza_index}: missing required field '{field_name}'")
        self.field_name = field_name
        self.stanza_index = stanza_index


class MalformedStanza(ControlFileError):
    def __init__(self, stanza_index: int, line: str):
        super().__init__(f"stanza {stanza_index}: cannot parse line {line!r}")
        self.stanza_index = stanza_index
        self.line = line


class MalformedDependency(ControlFileError):
    def __init__(self, text: str, offset: int, reason: str):
        super().__init__(f"offset {offset} in {text!r}: {reason}")
        self.text = text
        self.offset = offset
        self.reason = reason


class MalformedVersion(ControlFileError):
    def __init__(self, version: str, reason: str):
        super().__init__(f"bad version {version!r}: {reason}")
        self.version = version
        self.reason = reason


# ---------------------------------------------------------------------------
# Version ordering


def _split_version(version: str) -> tuple[int, str, str]:
    """Split into (epoch, upstream, revision); revision is '' when absent."""
    if not version or not version.isascii():
        raise MalformedVersion(version, "empty or non-ASCII")
    rest = version
    epoch = 0
    if ":" in rest:
        head, _, rest = rest.partition(":")
        if not head.isdigit():
            raise MalformedVersion(version, "epoch must be numeric")
        epoch = int(head)
    if not rest:
        raise MalformedVersion(version, "empty upstream part")
    if "-" in rest:
        upstream, _, revision = rest.rpartition("-")
        if not upstream or not revision:
            raise MalformedVersion(version, "empty part around '-'")
    else:
        upstream, revision = rest, ""
    for part in (upstream, revision):
        if not set(part) <= _VERSION_CHARS:
            raise MalformedVersion(version, "invalid character")
    return epoch, upstream, revision


def _char_order(c: str) -> int:
    # dpkg ordering: '~' before end-of-part, letters before non-letters.
    if c == "~":
        return -1
    if c.isdigit():
        return 0
    if c.isalpha():
        return ord(c)
    return ord(c) + 256


def _compare_part(a: str, b: str) -> int:
    """Alternating non-digit/digit run comparison of one version part."""
    i = j = 0
    la, lb = len(a), len(b)
    while i < la or j < lb:
        # Non-digit run: compare character orders, end-of-run counts as 0.
        while (i < la and not a[i].isdigit()) or (j < lb and not b[j].isdigit()):
            ac = _char_order(a[i]) if i < la else 0
            bc = _char_order(b[j]) if j < lb else 0
            if ac != bc:
                return -1 if ac < bc else 1
            i += 1
            j += 1
        # Digit run: numeric comparison, missing run counts as 0.
        while i < la and a[i] == "0":
            i += 1
        while j < lb and b[j] == "0":
            j += 1
        first_diff = 0
        while i < la and j < lb and a[i].isdigit() and b[j].isdigit():
            if not first_diff:
                first_diff = (a[i] > b[j]) - (a[i] < b[j])
            i += 1
            j += 1
        if i < la and a[i].isdigit():
            return 1
        if j < lb and b[j].isdigit():
            return -1
        if first_diff:
            return first_diff
    return 0


def compare_versions(v1: str, v2: str) -> int:
    """Total order on version strings: negative, zero or positive like cmp().

    Epoch dominates, then the upstream part, then the revision (absent
    revision compares like the empty string, which equals "0").
    """
    e1, u1, r1 = _split_version(v1)
    e2, u2, r2 = _split_version(v2)
    if e1 != e2:
        return -1 if e1 < e2 else 1
    c = _compare_part(u1, u2)
    if c:
        return c
    return _compare_part(r1, r2)


#: Key function for sorting version strings with the order above.
version_key = functools.cmp_to_key(compare_versions)


def _canonical_part(s: str) -> tuple:
    """Normal form of one version part: alternating char-order/int entries.

    Two parts compare equal under _compare_part iff their normal forms are
    identical (trailing zero runs and leading zeros are stripped).
    """
    entries: list = []
    i, n = 0, len(s)
    while i < n:
        j = i
        while j < n and not s[j].isdigit():
            j += 1
        entries.append(tuple(_char_order(c) for c in s[i:j]) + (0,))
        i = j
        while j < n and s[j].isdigit():
            j += 1
        entries.append(int(s[i:j]) if j > i else 0)
        i = j
    if len(entries) % 2:
        entries.append(0)
    while entries and entries[-1] == 0 and entries[-2] == (0,):
        del entries[-2:]
    return tuple(entries)


def canonical_version(version: str) -> tuple:
    """Normal form; two versions are equal iff their normal forms are."""
    epoch, upstream, revision = _split_version(version)
    return epoch, _canonical_part(upstream), _canonical_part(revision)


# ---------------------------------------------------------------------------
# Dependency grammar


@dataclass(frozen=True)
class VersionConstraint:
    """One alternative of a dependency: a name plus an optional version range."""

    name: str
    relation: str = ANY
    bound: str | None = None

    def __post_init__(self):
        if self.relation == ANY:
            if self.bound is not None:
                raise ValueError("relation 'any' cannot carry a bound")
        elif self.relation not in RELATIONS or self.bound is None:
            raise ValueError(f"bad relation {self.relation!r}")

    def matches(self, name: str, version: str) -> bool:
        if name != self.name:
            return False
        if self.relation == ANY:
            return True
        c = compare_versions(version, self.bound)
        return {
            "<<": c < 0,
            "<=": c <= 0,
            "=": c == 0,
            ">=": c >= 0,
            ">>": c > 0,
        }[self.relation]

    def __str__(self) -> str:
        if self.relation == ANY:
            return self.name
        return f"{self.name} ({self.relation} {self.bound})"


def _check_name(name: str, text: str, offset: int) -> str:
    if not name or not name.isascii() or set(name) & _NAME_FORBIDDEN:
        raise MalformedDependency(text, offset, f"bad package name {name!r}")
    return name


def _parse_alternative(text: str, start: int, end: int) -> VersionConstraint:
    chunk = text[start:end]
    stripped = chunk.strip()
    offset = start + (len(chunk) - len(chunk.lstrip()))
    if not stripped:
        raise MalformedDependency(text, offset, "empty alternative")
    if "(" in stripped:
        head, _, tail = stripped.partition("(")
        name = _check_name(head.strip(), text, offset)
        if not tail.endswith(")"):
            raise MalformedDependency(text, offset, "unterminated version constraint")
        inner = tail[:-1].strip()
        for rel in ("<<", "<=", ">=", ">>", "="):
            if inner.startswith(rel):
                bound = inner[len(rel):].strip()
                if not bound:
                    raise MalformedDependency(text, offset, "empty version bound")
                try:
                    _split_version(bound)
                except MalformedVersion as exc:
                    raise MalformedDependency(text, offset, exc.reason) from exc
                return VersionConstraint(name, rel, bound)
        raise MalformedDependency(text, offset, f"bad relation in {inner!r}")
    name = _check_name(stripped, text, offset)
    return VersionConstraint(name)


def _split_offsets(text: str, sep: str, start: int, end: int) -> list[tuple[int, int]]:
    spans = []
    while True:
        pos = text.find(sep, start, end)
        if pos < 0:
            spans.append((start, end))
            return spans
        spans.append((start, pos))
        start = pos + 1


def parse_dependency_expr(text: str) -> list[list[VersionConstraint]]:
    """Parse comma-separated AND-groups of '|'-separated alternatives."""
    if not text.strip():
        return []
    groups = []
    for gstart, gend in _split_offsets(text, ",", 0, len(text)):
        groups.append([_parse_alternative(text, astart, aend)
                       for astart, aend in _split_offsets(text, "|", gstart, gend)])
    return groups


def parse_conflict_expr(text: str) -> list[VersionConstraint]:
    """Parse a comma-separated conflict list (alternatives are not allowed)."""
    if not text.strip():
        return []
    if "|" in text:
        raise MalformedDependency(text, text.find("|"), "'|' not allowed in conflicts")
    return [_parse_alternative(text, start, end)
            for start, end in _split_offsets(text, ",", 0, len(text))]


def parse_provides(text: str) -> list[str]:
    """Parse a Provides list; versioned provides are reduced to their name."""
    if not text.strip():
        return []
    return [_parse_alternative(text, start, end).name
            for start, end in _split_offsets(text, ",", 0, len(text))]


def format_dependency_expr(groups: list[list[VersionConstraint]]) -> str:
    """Canonical rendering; reproduces accepted input token for token."""
    return ", ".join(" | ".join(str(alt) for alt in group) for group in groups)


def format_conflict_expr(constraints: list[VersionConstraint]) -> str:
    return ", ".join(str(c) for c in constraints)


# ---------------------------------------------------------------------------
# Stanza parsing


@dataclass
class PackageStanza:
    """One parsed Packages stanza.

    ``depends`` holds AND-groups of alternatives; ``conflicts`` is a flat
    constraint list (Breaks is folded in); ``provides`` lists virtual names.
    The architecture field is retained but ignored by the model.
    """

    name: str
    version: str
    depends: list[list[VersionConstraint]] = field(default_factory=list)
    conflicts: list[VersionConstraint] = field(default_factory=list)
    provides: list[str] = field(default_factory=list)
    architecture: str | None = None


def _split_stanza_blocks(text: str) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
        else:
            current.append(line)
    if current:
        blocks.append(current)
    return blocks


def _fields_of_block(block: list[str], index: int) -> dict[str, str]:
    fields: dict[str, str] = {}
    last_key = None
    for line in block:
        if line[0] in " \t":
            if last_key is None:
                raise MalformedStanza(index, line)
            fields[last_key] += " " + line.strip()
            continue
        key, sep, value = line.partition(":")
        if not sep or not key.strip() or " " in key.strip():
            raise MalformedStanza(index, line)
        last_key = key.strip().lower()
        fields[last_key] = value.strip()
    return fields


def parse_packages_stream(data: bytes | str) -> list[PackageStanza]:
    """Parse a Packages file into stanzas.

    Stanzas are blank-line separated ``Key: value`` blocks with indented
    continuation lines; unknown fields are ignored and field order is free.
    """
    text = data.decode("latin-1") if isinstance(data, bytes) else data
    stanzas = []
    for index, block in enumerate(_split_stanza_blocks(text)):
        fields = _fields_of_block(block, index)
        if "package" not in fields:
            raise MissingField("Package", index)
        if "version" not in fields:
            raise MissingField("Version", index)
        name = fields["package"]
        if not name.isascii() or set(name) & _NAME_FORBIDDEN:
            raise MalformedStanza(index, f"Package: {name}")
        _split_version(fields["version"])
        depends = parse_dependency_expr(fields.get("depends", ""))
        depends += parse_dependency_expr(fields.get("pre-depends", ""))
        conflicts = parse_conflict_expr(fields.get("conflicts", ""))
        conflicts += parse_conflict_expr(fields.get("breaks", ""))
        stanzas.append(PackageStanza(
            name=name,
            version=fields["version"],
            depends=depends,
            conflicts=conflicts,
            provides=parse_provides(fields.get("provides", "")),
            architecture=fields.get("architecture"),
        ))
    return stanzas


def render_stanza(stanza: PackageStanza) -> str:
    lines = [f"Package: {stanza.name}", f"Version: {stanza.version}"]
    if stanza.architecture:
        lines.append(f"Architecture: {stanza.architecture}")
    if stanza.depends:
        lines.append(f"Depends: {format_dependency_expr(stanza.depends)}")
    if stanza.conflicts:
        lines.append(f"Conflicts: {format_conflict_expr(stanza.conflicts)}")
    if stanza.provides:
        lines.append(f"Provides: {', '.join(stanza.provides)}")
    return "\n".join(lines) + "\n"


def render_packages(stanzas: list[PackageStanza]) -> str:
    return "\n".join(render_stanza(s) for s in stanzas)
