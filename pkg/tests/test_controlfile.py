from __future__ import annotations

import random
import re

import pytest

from satmigrate.controlfile import (MalformedDependency, MalformedStanza,
                                    MalformedVersion, MissingField,
                                    PackageStanza, VersionConstraint,
                                    canonical_version, compare_versions,
                                    format_dependency_expr,
                                    parse_conflict_expr, parse_dependency_expr,
                                    parse_packages_stream, parse_provides,
                                    render_packages, version_key)

from .generators import random_version


# -- version comparison -------------------------------------------------------

def test_identical_versions_equal():
    assert compare_versions("1.0", "1.0") == 0


def test_numeric_segments_compare_numerically():
    assert compare_versions("1.2", "1.10") < 0


def test_tilde_sorts_before_empty():
    assert compare_versions("1.0~rc1", "1.0") < 0


def test_epoch_dominates():
    assert compare_versions("1:0.9", "0.10") > 0


@pytest.mark.parametrize("a,b", [
    ("1.0", "1.0-0"),
    ("0:1.0", "1.0"),
    ("1.0", "1.00"),
    ("1a", "1a0"),
])
def test_equal_after_normalization(a, b):
    assert compare_versions(a, b) == 0
    assert canonical_version(a) == canonical_version(b)


@pytest.mark.parametrize("bad", ["", "abc:1", "1.0-", "-1", ":1", "1 0", "1!0"])
def test_malformed_versions_rejected(bad):
    with pytest.raises(MalformedVersion):
        compare_versions(bad, "1.0")


def test_letters_sort_before_other_characters():
    assert compare_versions("0a", "0+") < 0
    assert compare_versions("0+", "0.1") < 0


def test_version_order_is_total_on_random_sample():
    rng = random.Random(7)
    versions = [random_version(rng) for _ in range(300)]
    for a, b in zip(versions, versions[1:]):
        assert compare_versions(a, b) == -compare_versions(b, a)
        assert (compare_versions(a, b) == 0) == \
            (canonical_version(a) == canonical_version(b))
    ordered = sorted(versions, key=version_key)
    for a, b in zip(ordered, ordered[1:]):
        assert compare_versions(a, b) <= 0
    # transitivity spot check on consecutive triples of the sorted list
    for a, b, c in zip(ordered, ordered[1:], ordered[2:]):
        if compare_versions(a, b) < 0 and compare_versions(b, c) < 0:
            assert compare_versions(a, c) < 0


# -- dependency grammar -------------------------------------------------------

def test_single_bare_name():
    assert parse_dependency_expr("b") == [[VersionConstraint("b")]]


def test_groups_and_alternatives():
    # hand parse: two AND-groups, the first with two alternatives
    groups = parse_dependency_expr("b (>= 2) | c, d (<< 1)")
    assert groups == [
        [VersionConstraint("b", ">=", "2"), VersionConstraint("c")],
        [VersionConstraint("d", "<<", "1")],
    ]


def test_empty_bound_is_malformed():
    with pytest.raises(MalformedDependency):
        parse_dependency_expr("b (>= )")


@pytest.mark.parametrize("bad", ["b | | c", "b (< 1)", "a,", "(>= 1)", "a b"])
def test_malformed_dependencies(bad):
    with pytest.raises(MalformedDependency):
        parse_dependency_expr(bad)


def test_malformed_dependency_reports_offset():
    with pytest.raises(MalformedDependency) as err:
        parse_dependency_expr("a, b (>= )")
    assert err.value.offset == 3  # position of 'b', the bad alternative
    assert err.value.text == "a, b (>= )"


def test_conflicts_reject_alternatives():
    assert parse_conflict_expr("a, b (<< 2)") == [
        VersionConstraint("a"), VersionConstraint("b", "<<", "2")]
    with pytest.raises(MalformedDependency):
        parse_conflict_expr("a | b")


def test_provides_reduce_to_names():
    assert parse_provides("x, y (= 2)") == ["x", "y"]


def _tokens(text: str) -> list[str]:
    return re.findall(r"<<|<=|>=|>>|=|[(),|]|[^\s,|()]+", text)


def test_pretty_printer_is_token_faithful():
    samples = [
        "b",
        "b(>=2)|c,d (<< 1)",
        "a , b|c (= 1:2.0-1) , d",
    ]
    for text in samples:
        groups = parse_dependency_expr(text)
        assert _tokens(format_dependency_expr(groups)) == _tokens(text)
        # printing is a fixed point
        assert format_dependency_expr(parse_dependency_expr(
            format_dependency_expr(groups))) == format_dependency_expr(groups)


# -- stanza parsing -----------------------------------------------------------

def test_minimal_stanza():
    stanzas = parse_packages_stream("Package: a\nVersion: 1.0\n\n")
    assert len(stanzas) == 1
    assert stanzas[0].name == "a"
    assert stanzas[0].version == "1.0"
    assert stanzas[0].depends == []
    assert stanzas[0].conflicts == []


def test_stanza_with_depends():
    stanzas = parse_packages_stream(
        "Package: a\nVersion: 1\nDepends: b (>= 2), c | d\n\n")
    assert stanzas[0].depends == [
        [VersionConstraint("b", ">=", "2")],
        [VersionConstraint("c"), VersionConstraint("d")],
    ]


def test_missing_version_reports_field_and_index():
    with pytest.raises(MissingField) as err:
        parse_packages_stream("Package: ok\nVersion: 1\n\nPackage: a\n")
    assert err.value.field_name == "Version"
    assert err.value.stanza_index == 1


def test_missing_package_field():
    with pytest.raises(MissingField) as err:
        parse_packages_stream("Version: 1\n")
    assert err.value.field_name == "Package"


def test_continuation_lines_and_unknown_fields():
    text = ("Package: a\nVersion: 1\nMaintainer: someone\n"
            "Depends: b,\n c | d\nDescription: stuff\n continued text\n\n")
    stanzas = parse_packages_stream(text)
    assert stanzas[0].depends == [
        [VersionConstraint("b")],
        [VersionConstraint("c"), VersionConstraint("d")],
    ]


def test_breaks_and_predepends_are_folded_in():
    text = ("Package: a\nVersion: 1\nPre-Depends: e\n"
            "Conflicts: b\nBreaks: c (<< 2)\n\n")
    stanza = parse_packages_stream(text)[0]
    assert stanza.depends == [[VersionConstraint("e")]]
    assert stanza.conflicts == [VersionConstraint("b"),
                                VersionConstraint("c", "<<", "2")]


def test_architecture_parsed_but_carried_only():
    stanza = parse_packages_stream(
        "Package: a\nVersion: 1\nArchitecture: amd64\n\n")[0]
    assert stanza.architecture == "amd64"


def test_bytes_input_accepted():
    stanzas = parse_packages_stream(b"Package: a\nVersion: 1\n\n")
    assert stanzas[0].name == "a"


def test_field_order_is_irrelevant():
    first = parse_packages_stream("Package: a\nVersion: 1\nDepends: b\n\n")
    second = parse_packages_stream("Depends: b\nVersion: 1\nPackage: a\n\n")
    assert first == second


def test_unparseable_line_is_rejected():
    with pytest.raises(MalformedStanza):
        parse_packages_stream("Package: a\nVersion: 1\nnonsense line\n")


def test_round_trip_up_to_normalization():
    text = ("Package: a\nVersion: 1:2.0-1\nDepends: b(>=2)|c , d\n"
            "Conflicts: e\nProvides: virt\nArchitecture: any\n\n"
            "Package: b\nVersion: 2\n\n")
    stanzas = parse_packages_stream(text)
    assert parse_packages_stream(render_packages(stanzas)) == stanzas


def test_stanza_roundtrip_random_constraints():
    rng = random.Random(11)
    for _ in range(50):
        depends = []
        for _ in range(rng.randint(0, 3)):
            group = []
            for _ in range(rng.randint(1, 3)):
                if rng.random() < 0.5:
                    group.append(VersionConstraint(f"n{rng.randint(0, 5)}"))
                else:
                    group.append(VersionConstraint(
                        f"n{rng.randint(0, 5)}",
                        rng.choice(["<<", "<=", "=", ">=", ">>"]),
                        random_version(rng)))
            depends.append(group)
        stanza = PackageStanza(name=f"p{rng.randint(0, 9)}",
                               version=random_version(rng), depends=depends)
        assert parse_packages_stream(render_packages([stanza])) == [stanza]
