"""Feature weighting and top-n entity summaries.

A feature shared with at least one nearest neighbor earns weight
|A| * ln(|E| / |B|): neighbor support times inverse global frequency.
|B| counts the summarized entity itself, so a feature held by every
entity in the universe weighs exactly 0, and |B| >= 1 always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .rdf import (Feature, PathFeature, Term, TripleStore, iri, term_key)
from .similarity import (DEFAULT_K, NeighborList, k_nearest_neighbors,
                         neighbors_above_threshold)
from .usage import UsageMatrix

DEFAULT_N = 10

FIXED_K = "fixed-k"
THRESHOLD = "threshold"

STATUS_OK = "ok"
STATUS_NO_USAGE = "no usage data"


class ResolutionError(LookupError):
    """An id could not be resolved to a summarizable entity."""


class EntityNotInUniverseError(ValueError):
    """feature_weights was asked about an entity outside the universe."""


@dataclass(frozen=True)
class WeightedFeature:
    feature: Feature | PathFeature
    neighbor_support: int
    global_support: int
    weight: float


@dataclass
class Summary:
    entity: Term
    k_used: int
    features: list[WeightedFeature] = field(default_factory=list)
    status: str = STATUS_OK
    mode: str = FIXED_K


def entity_universe(store: TripleStore, type_filter: Term) -> set[Term]:
    """All subjects carrying the rdf:type triple for type_filter."""
    return store.typed(type_filter)


def _feature_sort_key(wf: WeightedFeature) -> tuple:
    return (-wf.weight, -wf.neighbor_support,
            tuple(term_key(t) for t in wf.feature))


def _weigh(witnesses: Mapping[Feature | PathFeature, set[Term]],
           global_support: Mapping[Feature | PathFeature, int],
           universe_size: int) -> list[WeightedFeature]:
    out = []
    for f, ws in witnesses.items():
        a = len(ws)
        b = global_support[f]
        out.append(WeightedFeature(f, a, b, a * math.log(universe_size / b)))
    out.sort(key=_feature_sort_key)
    return out


def feature_weights(store: TripleStore, e: Term, universe: set[Term],
                    knn_predicate: Term, type_filter: Term
                    ) -> list[WeightedFeature]:
    """Weighted features of e from its materialized knn edges, sorted
    by descending weight (ties: descending support, ascending feature)."""
    if e not in universe:
        raise EntityNotInUniverseError(f"entity not in universe: {e.lexical}")
    witnesses = store.shared_one_hop_features(e, knn_predicate, type_filter)
    support = {f: len(store.entities_with_feature(f, type_filter))
               for f in witnesses}
    return _weigh(witnesses, support, len(universe))


def _path_holders(store: TripleStore, pf: PathFeature,
                  universe: set[Term]) -> set[Term]:
    holders: set[Term] = set()
    for mid in store.subjects_with(pf.second, pf.terminal):
        holders |= store.subjects_with(pf.first, mid)
    return holders & universe


def path_feature_weights(store: TripleStore, e: Term, universe: set[Term],
                         knn_predicate: Term, type_filter: Term
                         ) -> list[WeightedFeature]:
    """Two-hop analog of feature_weights over (p, q, t) composites."""
    if e not in universe:
        raise EntityNotInUniverseError(f"entity not in universe: {e.lexical}")
    witnesses = store.shared_two_hop_features(e, knn_predicate, type_filter)
    support = {pf: len(_path_holders(store, pf, universe)) for pf in witnesses}
    return _weigh(witnesses, support, len(universe))


def _resolve_target(e: str, link: Mapping[str, str], matrix: UsageMatrix,
                    store: TripleStore) -> tuple[str | None, Term]:
    """Map an item id or entity IRI onto (item id in matrix, entity term)."""
    if e in link:
        entity = iri(link[e])
        if not store.has_subject(entity):
            raise ResolutionError(
                f"link map: item {e!r} maps to {link[e]!r}, not in the store")
        return (e if e in matrix.items else None), entity
    entity = iri(e)
    if not store.has_subject(entity):
        raise ResolutionError(f"link map: unknown item id or entity iri: {e!r}")
    # entity iri given directly: pick its smallest linked item with usage data
    candidates = sorted(item for item, target in link.items() if target == e)
    for item in candidates:
        if item in matrix.items:
            return item, entity
    return None, entity


def summarize(store: TripleStore, matrix: UsageMatrix,
              link: Mapping[str, str], e: str, *,
              knn_predicate: Term, type_filter: Term,
              k: int = DEFAULT_K, n: int = DEFAULT_N,
              mode: str = FIXED_K, tau: float | None = None,
              two_hop: bool = False) -> Summary:
    """End-to-end summary: neighborhood, witness collection, weighting,
    descending sort, truncation to the top n features."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    item_id, entity = _resolve_target(e, link, matrix, store)
    universe = entity_universe(store, type_filter)
    if entity not in universe:
        raise ResolutionError(
            f"type filter: entity {entity.lexical!r} lacks rdf:type "
            f"{type_filter.lexical!r}")
    mode_label = mode if mode == FIXED_K else f"{THRESHOLD}({tau:g})"
    if item_id is None:
        return Summary(entity, k, [], STATUS_NO_USAGE, mode_label)
    if mode == FIXED_K:
        nl = k_nearest_neighbors(matrix, item_id, k)
    elif mode == THRESHOLD:
        if tau is None:
            raise ValueError("threshold mode requires tau")
        nl = neighbors_above_threshold(matrix, item_id, tau)
    else:
        raise ValueError(f"unknown mode: {mode!r}")
    neighbors = _neighbor_entities(nl, link, store, universe) - {entity}
    if two_hop:
        witnesses = store.shared_two_hop_paths(entity, neighbors,
                                               (knn_predicate,))
        support = {pf: len(_path_holders(store, pf, universe))
                   for pf in witnesses}
    else:
        witnesses = store.shared_features(entity, neighbors, (knn_predicate,))
        support = {f: len(store.entities_with_feature(f, type_filter))
                   for f in witnesses}
    weighted = _weigh(witnesses, support, len(universe))
    return Summary(entity, k, weighted[:n], STATUS_OK, mode_label)


def _neighbor_entities(nl: NeighborList, link: Mapping[str, str],
                       store: TripleStore, universe: set[Term]) -> set[Term]:
    out = set()
    for item, _score in nl.neighbors:
        target = link.get(item)
        if target is None:
            continue
        term = iri(target)
        if term in universe and store.has_subject(term):
            out.add(term)
    return out
