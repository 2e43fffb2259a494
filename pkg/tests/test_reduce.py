import pytest

from bkpmoments import wick
from bkpmoments.reduce import (
    Basis,
    BasisTooLarge,
    Echelon,
    build_span,
    check_certificate,
    linear_completeness,
    probe_open_question,
    reduce_quadratic,
    symbol_monomials,
)
from bkpmoments.relations import verify
from golden import NEW8


@pytest.fixture(scope="module")
def reports():
    prior, out = [], {}
    for n in (6, 8, 10):
        out[n] = reduce_quadratic(n, prior)
        prior = prior + out[n].reduced_relations
    return out


def test_symbol_monomials():
    assert symbol_monomials(4, 2) == [((3, 1),), ((1, 1, 1, 1),), ((1, 1), (1, 1))]
    assert len(Basis.build(8).keys) == 13
    with pytest.raises(BasisTooLarge):
        Basis.build(12, cap=10)


@pytest.mark.parametrize("n", [6, 8, 10])
def test_certificates_are_sound(reports, n):
    rep = reports[n]
    prior = [r for m in reports if m < n for r in reports[m].reduced_relations]
    _, gens = build_span(n, prior)
    assert rep.certificates
    for cert in rep.certificates + rep.new_certificates:
        assert check_certificate(cert, gens)


def test_tampered_certificate_fails(reports):
    _, gens = build_span(8, [])
    cert = next(c for c in reports[8].certificates if c.combination)
    label, c = cert.combination[0]
    cert.combination[0] = (label, c + 1)
    try:
        assert not check_certificate(cert, gens)
    finally:
        cert.combination[0] = (label, c)


def test_order6_reduces_to_zero(reports):
    assert reports[6].is_fully_linearizable
    assert all(c.residue.is_zero() for c in reports[6].certificates)
    assert reports[6].reduced_relations == []


def test_order8_new_relation(reports):
    rep = reports[8]
    assert rep.is_fully_linearizable and rep.matches_new_family
    assert [r.ratio_to(NEW8.expr()) for r in rep.reduced_relations] == [1]


def test_order10_linearizes(reports):
    rep = reports[10]
    assert rep.is_fully_linearizable and rep.matches_new_family
    assert len(rep.reduced_relations) == 2


@pytest.mark.parametrize("n", [8, 10])
def test_new_relations_verify(reports, n):
    for rel in reports[n].reduced_relations:
        for f in (wick.ExternalField.random(2, 5), wick.ExternalField.random(4, 5)):
            for P in (0, 1):
                assert verify(rel, f, P, cap=14).holds


@pytest.mark.parametrize("n", [8, 10, 12])
def test_pivot_strategy_independence(n):
    a = reduce_quadratic(n, strategy="min_denominator")
    b = reduce_quadratic(n, strategy="first")
    assert a.span_dimension == b.span_dimension
    assert a.is_fully_linearizable == b.is_fully_linearizable
    assert [c.residue.is_zero() for c in a.certificates] == [c.residue.is_zero() for c in b.certificates]
    assert [c.residue.is_linear() for c in a.certificates] == [c.residue.is_linear() for c in b.certificates]
    assert len(a.reduced_relations) == len(b.reduced_relations)
    # residues differ by span elements only: same space modulo the span
    basis, gens = build_span(n, a.prior)
    ech = Echelon([basis.vector(g.expr) for g in gens])
    for ca, cb in zip(a.certificates, b.certificates):
        diff = basis.vector(ca.residue - cb.residue)
        assert not ech.reduce(diff)[0]


def test_order12_is_not_linearizable():
    """Recorded finding: nonlinear residues survive at order 12 even though the
    known linear relations of every order up to 12 are complete."""
    summary = probe_open_question(12, check_completeness=True)
    r12 = summary.reports[-1]
    assert not r12.is_fully_linearizable
    assert r12.matches_new_family is False
    assert all(c.complete for c in summary.completeness)
    nonlinear = [c.residue for c in r12.certificates if not c.residue.is_linear()]
    f = wick.ExternalField.random(4, 9)
    assert nonlinear and all(verify(e, f).holds for e in nonlinear)


def test_completeness_detects_missing_relation():
    c = linear_completeness(8, prior=[])  # NEW8 withheld
    assert (c.kernel_dimension, c.span_rank, c.complete) == (4, 3, False)
