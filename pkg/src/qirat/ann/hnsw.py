"""Hierarchical navigable small world graph over unit-normalized vectors.

Standard construction: node levels drawn as floor(-ln(U) * mL) with
mL = 1/ln(M); greedy descent through the upper layers, beam search of width
ef at the target layer, and diversity-aware neighbor selection. Similarity
is cosine (dot product on normalized vectors); higher is better.

The hot paths (beam search, neighbor selection, build loop) are numba
kernels over flat int32 adjacency arrays: ``neigh[node, level, slot]`` with
per-(node, level) valid counts. Level 0 allows 2M neighbors, upper levels M.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .. import formats
from ..errors import TruncatedFileError
from ..exact import ScoredHit, _as_unit_vector
from ..store import EmbeddingMatrix

NO_NODE = -1


@njit(cache=True, fastmath=True)
def _dot(vectors, i, q):
    s = np.float32(0.0)
    for t in range(vectors.shape[1]):
        s += vectors[i, t] * q[t]
    return s


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    keys[size] = key
    vals[size] = val
    i = size
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < size and keys[left] < keys[smallest]:
            smallest = left
        if right < size and keys[right] < keys[smallest]:
            smallest = right
        if smallest == i:
            break
        keys[smallest], keys[i] = keys[i], keys[smallest]
        vals[smallest], vals[i] = vals[i], vals[smallest]
        i = smallest
    return key, val, size


@njit(cache=True, fastmath=True)
def _greedy_step(vectors, neigh, cnt, level, q, start):
    """Hill-climb at one level until no neighbor improves the similarity."""
    node = start
    best = _dot(vectors, node, q)
    improved = True
    while improved:
        improved = False
        for j in range(cnt[node, level]):
            nb = neigh[node, level, j]
            s = _dot(vectors, nb, q)
            if s > best:
                best = s
                node = nb
                improved = True
    return node


@njit(cache=True, fastmath=True)
def _search_layer(
    vectors, neigh, cnt, level, q, ep, ef, visited, epoch,
    cand_keys, cand_vals, res_keys, res_vals,
):
    """Beam search of width ef; results left in (res_keys, res_vals)[:rsize]
    as a min-heap of similarities. Returns rsize."""
    visited[ep] = epoch
    s = _dot(vectors, ep, q)
    csize = _heap_push(cand_keys, cand_vals, 0, -s, ep)
    rsize = _heap_push(res_keys, res_vals, 0, s, ep)
    while csize > 0:
        neg, node, csize = _heap_pop(cand_keys, cand_vals, csize)
        if rsize >= ef and -neg < res_keys[0]:
            break
        for j in range(cnt[node, level]):
            nb = neigh[node, level, j]
            if visited[nb] == epoch:
                continue
            visited[nb] = epoch
            s = _dot(vectors, nb, q)
            if rsize < ef or s > res_keys[0]:
                csize = _heap_push(cand_keys, cand_vals, csize, -s, nb)
                rsize = _heap_push(res_keys, res_vals, rsize, s, nb)
                if rsize > ef:
                    _, _, rsize = _heap_pop(res_keys, res_vals, rsize)
    return rsize


@njit(cache=True, fastmath=True)
def _select_neighbors(vectors, q_node_vec, sims, ids, size, cap, out):
    """Diversity heuristic on (sims, ids)[:size]: scan by decreasing
    similarity to the target, keep a candidate only if it is more similar to
    the target than to every already-kept neighbor; backfill with pruned
    candidates. Writes ids into out[:kept] and returns kept."""
    order = np.argsort(sims[:size])  # ascending; walk backwards
    kept = 0
    pruned = np.empty(size, np.int32)
    npruned = 0
    for oi in range(size - 1, -1, -1):
        if kept >= cap:
            break
        c = ids[order[oi]]
        s_target = sims[order[oi]]
        ok = True
        for j in range(kept):
            s_chosen = _dot(vectors, c, vectors[out[j]])
            if s_chosen >= s_target:
                ok = False
                break
        if ok:
            out[kept] = c
            kept += 1
        else:
            pruned[npruned] = c
            npruned += 1
    for j in range(npruned):
        if kept >= cap:
            break
        out[kept] = pruned[j]
        kept += 1
    return kept


@njit(cache=True, fastmath=True)
def _build_graph(vectors, levels, m, efc):
    n = vectors.shape[0]
    max_level = int(levels.max())
    cap0 = 2 * m
    neigh = np.full((n, max_level + 1, cap0), NO_NODE, np.int32)
    cnt = np.zeros((n, max_level + 1), np.int32)
    visited = np.zeros(n, np.int64)
    epoch = 0
    entry = 0
    entry_level = int(levels[0])

    buf = max(efc, cap0) + 2
    cand_keys = np.empty(n + buf, np.float32)
    cand_vals = np.empty(n + buf, np.int32)
    res_keys = np.empty(efc + buf, np.float32)
    res_vals = np.empty(efc + buf, np.int32)
    sel_out = np.empty(cap0 + 1, np.int32)
    link_sims = np.empty(cap0 + 1, np.float32)
    link_ids = np.empty(cap0 + 1, np.int32)

    for node in range(1, n):
        lvl = int(levels[node])
        q = vectors[node]
        ep = entry
        for level in range(entry_level, lvl, -1):
            ep = _greedy_step(vectors, neigh, cnt, level, q, ep)
        top = lvl if lvl < entry_level else entry_level
        for level in range(top, -1, -1):
            cap = cap0 if level == 0 else m
            epoch += 1
            rsize = _search_layer(
                vectors, neigh, cnt, level, q, ep, efc, visited, epoch,
                cand_keys, cand_vals, res_keys, res_vals,
            )
            kept = _select_neighbors(
                vectors, q, res_keys, res_vals, rsize, cap, sel_out
            )
            for j in range(kept):
                neigh[node, level, cnt[node, level]] = sel_out[j]
                cnt[node, level] += 1
            # backlinks, pruning with the same heuristic when over capacity
            for j in range(kept):
                nb = sel_out[j]
                if cnt[nb, level] < cap:
                    neigh[nb, level, cnt[nb, level]] = node
                    cnt[nb, level] += 1
                else:
                    size = cnt[nb, level]
                    for t in range(size):
                        link_ids[t] = neigh[nb, level, t]
                        link_sims[t] = _dot(vectors, link_ids[t], vectors[nb])
                    link_ids[size] = node
                    link_sims[size] = _dot(vectors, node, vectors[nb])
                    nkept = _select_neighbors(
                        vectors, vectors[nb], link_sims, link_ids, size + 1, cap, sel_out
                    )
                    for t in range(nkept):
                        neigh[nb, level, t] = sel_out[t]
                    for t in range(nkept, cap):
                        neigh[nb, level, t] = NO_NODE
                    cnt[nb, level] = nkept
                    # sel_out was clobbered; reload this insert's neighbors
                    for t in range(kept):
                        sel_out[t] = neigh[node, level, t]
            # next entry point: best result (highest sim, lowest id on ties)
            best = np.float32(-2.0)
            for t in range(rsize):
                if res_keys[t] > best or (res_keys[t] == best and res_vals[t] < ep):
                    best = res_keys[t]
                    ep = res_vals[t]
        if lvl > entry_level:
            entry = node
            entry_level = lvl
    return neigh, cnt, entry


@dataclass
class HNSWIndex:
    vectors: np.ndarray            # count x dim, float32, unit rows
    m: int = 16
    ef_construction: int = 200
    node_levels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int32))
    neigh: np.ndarray = field(default_factory=lambda: np.zeros((0, 1, 32), np.int32))
    cnt: np.ndarray = field(default_factory=lambda: np.zeros((0, 1), np.int32))
    entry: int = NO_NODE

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._visited = np.zeros(self.vectors.shape[0], np.int64)
        self._epoch = 0

    @property
    def count(self) -> int:
        return self.node_levels.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def level_mult(self) -> float:
        return 1.0 / math.log(self.m)

    def neighbors(self, node: int, level: int) -> list[int]:
        return self.neigh[node, level, : self.cnt[node, level]].tolist()

    @classmethod
    def from_lists(
        cls,
        vectors: np.ndarray,
        graph: list[list[list[int]]],
        m: int = 16,
        ef_construction: int = 200,
        entry: int | None = None,
    ) -> "HNSWIndex":
        """Build an index from explicit per-node per-level neighbor lists."""
        n = len(graph)
        levels = np.array([len(levels) - 1 for levels in graph], np.int32)
        max_level = int(levels.max()) if n else 0
        cap = max(2 * m, max((len(l) for g in graph for l in g), default=0))
        neigh = np.full((n, max_level + 1, cap), NO_NODE, np.int32)
        cnt = np.zeros((n, max_level + 1), np.int32)
        for node, node_levels in enumerate(graph):
            for level, links in enumerate(node_levels):
                for nb in links:
                    if not (0 <= nb < n):
                        raise ValueError(f"neighbor {nb} of node {node} does not exist")
                neigh[node, level, : len(links)] = links
                cnt[node, level] = len(links)
        if entry is None:
            entry = int(np.argmax(levels)) if n else NO_NODE
        return cls(
            np.ascontiguousarray(vectors, dtype=np.float32),
            m=m,
            ef_construction=ef_construction,
            node_levels=levels,
            neigh=neigh,
            cnt=cnt,
            entry=entry,
        )

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            formats.write_header(
                f, formats.MAGIC_HNSW, np.dtype(np.float32), True, self.dim, self.count
            )
            f.write(np.array([self.m, self.ef_construction], dtype="<u4").tobytes())
            f.write(np.array([self.entry], dtype="<i8").tobytes())
            for node in range(self.count):
                nlevels = int(self.node_levels[node]) + 1
                f.write(np.array([nlevels], dtype="<u4").tobytes())
                for level in range(nlevels):
                    links = self.neigh[node, level, : self.cnt[node, level]]
                    f.write(np.array([links.shape[0]], dtype="<u4").tobytes())
                    f.write(links.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path, matrix: EmbeddingMatrix) -> "HNSWIndex":
        with open(path, "rb") as f:
            _, _, dim, count = formats.read_header(f, formats.MAGIC_HNSW)
            if matrix.dim != dim or matrix.count != count:
                raise TruncatedFileError(
                    f"graph file is for a {count}x{dim} matrix, "
                    f"got {matrix.count}x{matrix.dim}"
                )
            params = formats.read_array(f, np.dtype("<u4"), (2,))
            entry = int(formats.read_array(f, np.dtype("<i8"), (1,))[0])
            graph = []
            for _ in range(count):
                nlevels = int(formats.read_array(f, np.dtype("<u4"), (1,))[0])
                levels = []
                for _ in range(nlevels):
                    nlinks = int(formats.read_array(f, np.dtype("<u4"), (1,))[0])
                    levels.append(formats.read_array(f, np.dtype("<u4"), (nlinks,)).tolist())
                graph.append(levels)
        return cls.from_lists(
            matrix.values.astype(np.float32),
            graph,
            m=int(params[0]),
            ef_construction=int(params[1]),
            entry=entry,
        )


def hnsw_build(
    matrix: EmbeddingMatrix, m: int = 16, ef_construction: int = 200, seed: int = 0
) -> HNSWIndex:
    """Insert every matrix row in order; levels drawn from the seeded RNG."""
    if m < 2:
        raise ValueError("M must be >= 2")
    vectors = np.ascontiguousarray(matrix.values, dtype=np.float32)
    rng = np.random.default_rng(seed)
    mult = 1.0 / math.log(m)
    u = 1.0 - rng.random(max(matrix.count, 1))  # uniform over (0, 1]
    levels = np.floor(-np.log(u) * mult).astype(np.int32)
    if matrix.count == 0:
        return HNSWIndex(vectors, m=m, ef_construction=ef_construction)
    neigh, cnt, entry = _build_graph(vectors, levels, m, ef_construction)
    return HNSWIndex(
        vectors,
        m=m,
        ef_construction=ef_construction,
        node_levels=levels,
        neigh=neigh,
        cnt=cnt,
        entry=entry,
    )


def hnsw_search(
    index: HNSWIndex, query: Sequence[float] | np.ndarray, k: int, ef_search: int = 100
) -> list[ScoredHit]:
    """Greedy descent plus a base-layer beam of width ef_search; returns the
    top-k of the beam by cosine, ties broken by ascending row."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if ef_search < k:
        raise ValueError(f"ef_search {ef_search} must be >= k {k}")
    if index.count == 0:
        return []
    q = _as_unit_vector(query)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.dim}")
    with index._lock:
        index._epoch += 1
        ep = index.entry
        for level in range(int(index.node_levels[index.entry]), 0, -1):
            ep = _greedy_step(index.vectors, index.neigh, index.cnt, level, q, ep)
        buf = ef_search + 2 * index.m + 2
        res_keys = np.empty(ef_search + buf, np.float32)
        res_vals = np.empty(ef_search + buf, np.int32)
        rsize = _search_layer(
            index.vectors, index.neigh, index.cnt, 0, q, ep, ef_search,
            index._visited, index._epoch,
            np.empty(index.count + buf, np.float32),
            np.empty(index.count + buf, np.int32),
            res_keys, res_vals,
        )
    hits = [(float(res_keys[i]), int(res_vals[i])) for i in range(rsize)]
    hits.sort(key=lambda t: (-t[0], t[1]))
    return [ScoredHit(row, sim) for sim, row in hits[:k]]
