"""Log-likelihood-ratio item similarity and neighborhood formation.

The pair similarity of two items with no common rater is defined as 0:
a raw G2 of such a table can be large (strong *negative* association),
but co-usage evidence is what neighborhoods are built from.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np
from scipy import sparse

from .usage import ContingencyTable, UsageMatrix

DEFAULT_K = 20


class UndefinedTableError(ValueError):
    """The all-zero contingency table has no defined likelihood ratio."""


def _xlx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def _entropy2(a: float, b: float) -> float:
    return _xlx(a + b) - _xlx(a) - _xlx(b)


def log_likelihood_ratio(t: ContingencyTable) -> float:
    """G2 statistic of a 2x2 contingency table, in natural-log units.

    Exactly 0.0 for rank-1 tables (k11*k22 == k12*k21, detected on the
    integer counts so statistical independence is never blurred by
    floating-point cancellation); clamped to 0 otherwise when rounding
    drives the sum negative. Symmetric in (k12, k21) bit-for-bit.
    """
    k11, k12, k21, k22 = t
    if min(k11, k12, k21, k22) < 0:
        raise ValueError(f"negative cell in contingency table: {t}")
    n = k11 + k12 + k21 + k22
    if n == 0:
        raise UndefinedTableError("all-zero contingency table")
    if k11 * k22 == k12 * k21:
        return 0.0
    row = _entropy2(k11 + k12, k21 + k22)
    col = _entropy2(k11 + k21, k12 + k22)
    # cell terms paired symmetrically so swapping k12/k21 is a no-op
    mat = _xlx(n) - ((_xlx(k11) + _xlx(k22)) + (_xlx(k12) + _xlx(k21)))
    llr = 2.0 * (row + col - mat)
    return llr if llr > 0.0 else 0.0


def similarity_score(t: ContingencyTable) -> float:
    """Map the unbounded G2 onto [0, 1): 1 - 1/(1 + G2)."""
    llr = log_likelihood_ratio(t)
    return 1.0 - 1.0 / (1.0 + llr)


@dataclass
class NeighborList:
    """Ordered (item, similarity) pairs for one center item.

    Similarities are non-increasing; ties are broken by ascending item id;
    the center never appears in its own list.
    """

    center: str
    neighbors: list[tuple[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.neighbors)

    def ids(self) -> list[str]:
        return [item for item, _ in self.neighbors]


def _scored_candidates(m: UsageMatrix, e: str) -> list[tuple[str, float]]:
    """All items with positive similarity to e, sorted by (-score, id)."""
    raters = m.raters_of(e)
    overlap: Counter[str] = Counter()
    for user in raters:
        overlap.update(m.items_by_user[user])
    del overlap[e]
    na = len(raters)
    total = m.total_users
    scored = []
    for b, k11 in overlap.items():
        nb = len(m.raters[b])
        t = ContingencyTable(k11, na - k11, nb - k11, total - na - nb + k11)
        s = similarity_score(t)
        if s > 0.0:
            scored.append((b, s))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def k_nearest_neighbors(m: UsageMatrix, e: str, k: int = DEFAULT_K) -> NeighborList:
    """Up to k most similar items to e, zero-score items excluded."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return NeighborList(e, _scored_candidates(m, e)[:k])


def neighbors_above_threshold(m: UsageMatrix, e: str, tau: float) -> NeighborList:
    """All items with similarity to e strictly above tau, no cardinality cap."""
    scored = [(b, s) for b, s in _scored_candidates(m, e) if s > tau]
    return NeighborList(e, scored)


def _llr_block(k11: np.ndarray, na: np.ndarray, nb: np.ndarray,
               total: int) -> np.ndarray:
    """Vectorized G2 over a (block x items) co-rater count matrix.

    Same formula and zero conventions as the scalar path.
    """
    k12 = na - k11
    k21 = nb - k11
    k22 = total - na - nb + k11

    def xlx(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = x[pos] * np.log(x[pos])
        return out

    row_margin_a = k11 + k12
    row_margin_b = k21 + k22
    col_margin_a = k11 + k21
    col_margin_b = k12 + k22
    n = np.full_like(k11, float(total))
    row = xlx(row_margin_a + row_margin_b) - xlx(row_margin_a) - xlx(row_margin_b)
    col = xlx(col_margin_a + col_margin_b) - xlx(col_margin_a) - xlx(col_margin_b)
    mat = xlx(n) - ((xlx(k11) + xlx(k22)) + (xlx(k12) + xlx(k21)))
    llr = 2.0 * (row + col - mat)
    llr[k11 * k22 == k12 * k21] = 0.0
    np.maximum(llr, 0.0, out=llr)
    return llr


def all_pairs_knn(m: UsageMatrix, k: int = DEFAULT_K, workers: int = 1,
                  block_size: int = 256) -> dict[str, NeighborList]:
    """Neighbor lists for every item of the matrix.

    Co-rater counts come from a sparse gram matrix computed in column
    blocks; scores and ordering match k_nearest_neighbors pointwise.
    The result is independent of block size and worker count.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    items = sorted(m.items)
    if not items:
        return {}
    users = sorted(m.users)
    item_index = {item: i for i, item in enumerate(items)}
    user_index = {user: i for i, user in enumerate(users)}

    rows = []
    cols = []
    for item, raters in m.raters.items():
        j = item_index[item]
        for user in raters:
            rows.append(user_index[user])
            cols.append(j)
    mat = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)),
        shape=(len(users), len(items)), dtype=np.float64)
    mat_t = mat.T.tocsr()
    counts = np.asarray(mat.sum(axis=0)).ravel()  # raters per item
    total = m.total_users

    def process_block(start: int) -> list[NeighborList]:
        stop = min(start + block_size, len(items))
        k11 = np.asarray((mat_t[start:stop] @ mat).todense())
        na = counts[start:stop][:, None]
        nb = counts[None, :]
        llr = _llr_block(k11, na, nb, total)
        score = 1.0 - 1.0 / (1.0 + llr)
        score[k11 == 0] = 0.0
        out = []
        for offset in range(stop - start):
            row = score[offset]
            row[start + offset] = 0.0  # self
            nz = np.flatnonzero(row > 0.0)
            order = np.lexsort((nz, -row[nz]))[:k]
            out.append(NeighborList(
                items[start + offset],
                [(items[j], float(row[j])) for j in nz[order]]))
        return out

    starts = range(0, len(items), block_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(process_block, starts))
    else:
        blocks = [process_block(s) for s in starts]
    return {nl.center: nl for block in blocks for nl in block}


def format_neighbors_tsv(nl: NeighborList) -> str:
    """TSV rows `center <TAB> neighbor <TAB> score` with 6-decimal scores."""
    return "".join(f"{nl.center}\t{item}\t{score:.6f}\n"
                   for item, score in nl.neighbors)


def write_neighbors_tsv(lists: Iterable[NeighborList] | Mapping[str, NeighborList],
                        out: IO[str]) -> None:
    if isinstance(lists, Mapping):
        lists = [lists[center] for center in sorted(lists)]
    for nl in lists:
        out.write(format_neighbors_tsv(nl))
