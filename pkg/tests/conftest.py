"""Shared fixtures: the hand-computable 8-film corpus, in memory and on disk."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from knnsum.rdf import RDF_TYPE, Triple, TripleStore, iri
from knnsum.usage import UsageMatrix

EX = "http://example.org/"
FILM_TYPE = EX + "Film"
GENRE = EX + "p/genre"
STUDIO = EX + "p/studio"
COUNTRY = EX + "p/country"
KNN_PRED = "urn:knnsum:knn"

FILMS = [f"m{i}" for i in range(1, 9)]


def film_iri(item_id: str) -> str:
    return f"{EX}film/{item_id.upper()}"


def eight_film_links() -> dict[str, str]:
    return {m: film_iri(m) for m in FILMS}


def eight_film_pairs() -> list[tuple[str, str]]:
    """Two disjoint rater populations: u1-u4 rate m1-m4, u5-u8 rate m5-m8."""
    pairs = []
    for u in range(1, 5):
        for m in range(1, 5):
            pairs.append((f"u{u}", f"m{m}"))
    for u in range(5, 9):
        for m in range(5, 9):
            pairs.append((f"u{u}", f"m{m}"))
    return pairs


def eight_film_triples() -> list[Triple]:
    """Cluster 1 shares genre g1 (cluster 2 shares g2); m1+m2 share studio
    s1 (m5+m6 share s2); every film shares country c1."""
    triples = []
    for m in FILMS:
        e = iri(film_iri(m))
        triples.append(Triple(e, RDF_TYPE, iri(FILM_TYPE)))
        triples.append(Triple(e, iri(COUNTRY), iri(EX + "v/c1")))
    for m in FILMS[:4]:
        triples.append(Triple(iri(film_iri(m)), iri(GENRE), iri(EX + "v/g1")))
    for m in FILMS[4:]:
        triples.append(Triple(iri(film_iri(m)), iri(GENRE), iri(EX + "v/g2")))
    for m in ("m1", "m2"):
        triples.append(Triple(iri(film_iri(m)), iri(STUDIO), iri(EX + "v/s1")))
    for m in ("m5", "m6"):
        triples.append(Triple(iri(film_iri(m)), iri(STUDIO), iri(EX + "v/s2")))
    return triples


@dataclass
class Corpus:
    root: Path
    ratings: Path
    triples: Path
    links: Path
    bundle: Path
    config: Path


def write_eight_film_corpus(root: Path) -> Corpus:
    ratings = root / "ratings.dat"
    lines = ["userID\tmovieID\trating"]
    lines += [f"{u}\t{m}\t4.0" for u, m in eight_film_pairs()]
    ratings.write_text("\n".join(lines) + "\n", encoding="utf-8")

    triples = root / "graph.nt"
    rows = []
    for t in eight_film_triples():
        rows.append(f"<{t.subject.lexical}> <{t.predicate.lexical}> "
                    f"<{t.object.lexical}> .")
    triples.write_text("\n".join(sorted(rows)) + "\n", encoding="utf-8")

    links = root / "links.tsv"
    links.write_text(
        "".join(f"{m}\t{film_iri(m)}\n" for m in FILMS), encoding="utf-8")

    bundle = root / "bundle.json"
    config = root / "pipeline.cfg"
    config.write_text(
        f"ratings = {ratings}\n"
        f"triples = {triples}\n"
        f"links = {links}\n"
        f"bundle = {bundle}\n"
        f"type_filter = {FILM_TYPE}\n"
        "rating_col = 2\n",
        encoding="utf-8")
    return Corpus(root, ratings, triples, links, bundle, config)


@pytest.fixture
def eight_film_corpus(tmp_path: Path) -> Corpus:
    return write_eight_film_corpus(tmp_path)


@pytest.fixture
def eight_film_matrix() -> UsageMatrix:
    return UsageMatrix(eight_film_pairs())


@pytest.fixture
def eight_film_store() -> TripleStore:
    return TripleStore(eight_film_triples())
