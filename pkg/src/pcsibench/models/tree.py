"""Exact-split regression trees (variance reduction) compiled with numba.

Feature values are pre-coded as ranks into the sorted unique training
values, so a node's split search is a bincount plus one cumulative scan.
Candidate thresholds are midpoints between adjacent values present in
the node. Ties in impurity go to the feature earliest in canonical
(name-sorted) order, then the lowest threshold.

Per-node feature subsampling ranks features by a hash of the feature's
name and the node, which makes a fitted tree independent of column order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ..rng import derive_seed, name_key

_MASK = (1 << 64) - 1


@dataclass
class EncodedFeatures:
    """Rank codes of a training matrix and the unique values behind them."""

    codes: np.ndarray  # (n, p) int32
    uniques: np.ndarray  # (p, max_unique) float64, padded
    n_unique: np.ndarray  # (p,) int32
    keys: np.ndarray  # (p,) uint64 hashed feature names
    rank: np.ndarray  # (p,) int64 canonical position (sorted names)
    order: np.ndarray  # (p,) int64 columns in canonical order


def encode_features(x: np.ndarray, feature_names) -> EncodedFeatures:
    n, p = x.shape
    uniq_list = [np.unique(x[:, j]) for j in range(p)]
    max_u = max((len(u) for u in uniq_list), default=1)
    uniques = np.zeros((p, max(max_u, 1)))
    n_unique = np.zeros(p, dtype=np.int32)
    codes = np.zeros((n, p), dtype=np.int32)
    for j, u in enumerate(uniq_list):
        uniques[j, : len(u)] = u
        n_unique[j] = len(u)
        codes[:, j] = np.searchsorted(u, x[:, j])
    order = np.array(sorted(range(p), key=lambda j: feature_names[j]), dtype=np.int64)
    rank = np.empty(p, dtype=np.int64)
    rank[order] = np.arange(p)
    keys = np.array([name_key(name) for name in feature_names], dtype=np.uint64)
    return EncodedFeatures(codes, uniques, n_unique, keys, rank, order)


@dataclass
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    gain: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_node", "gain")}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
            n_node=np.asarray(d["n_node"], dtype=np.int64),
            gain=np.asarray(d["gain"], dtype=np.float64),
        )

    def predict(self, x: np.ndarray) -> np.ndarray:
        return _predict_tree(np.ascontiguousarray(x, dtype=np.float64), self.feature,
                             self.threshold, self.left, self.right, self.value)


@nb.njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, nogil=True)
def _build(codes, uniques, n_unique, keys, rank, order, y, rows, max_depth, max_features, tree_key):
    m = rows.shape[0]
    p = codes.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)
    n_node = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)

    idx = rows.copy()
    max_u = uniques.shape[1]
    cnt = np.zeros(max_u, dtype=np.int64)
    sm = np.zeros(max_u)
    scores = np.empty(p, dtype=np.uint64)
    use_all = max_features >= p

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    golden = np.uint64(0x9E3779B97F4A7C15)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        nn = end - start
        total = 0.0
        for i in range(start, end):
            total += y[idx[i]]
        mean = total / nn
        value[node] = mean
        n_node[node] = nn
        if depth >= max_depth or nn < 2:
            continue
        sse = 0.0
        for i in range(start, end):
            d = y[idx[i]] - mean
            sse += d * d
        if sse <= 1e-24 * nn * (mean * mean + 1.0):
            continue

        # candidate features, visited in canonical order
        if use_all:
            cand = order
        else:
            node_key = _mix(tree_key + np.uint64(node + 1) * golden)
            for f in range(p):
                scores[f] = _mix(keys[f] ^ node_key)
            picked = np.argsort(scores)[:max_features]
            picked_rank = np.empty(max_features, dtype=np.int64)
            for t in range(max_features):
                picked_rank[t] = rank[picked[t]]
            cand = picked[np.argsort(picked_rank)]

        parent_proxy = total * total / nn
        best_proxy = parent_proxy
        best_f = -1
        best_code = -1
        for ci in range(cand.shape[0]):
            f = cand[ci]
            nu = n_unique[f]
            if nu < 2:
                continue
            for c in range(nu):
                cnt[c] = 0
                sm[c] = 0.0
            for i in range(start, end):
                r = idx[i]
                c = codes[r, f]
                cnt[c] += 1
                sm[c] += y[r]
            ln = 0
            ls = 0.0
            for c in range(nu - 1):
                if cnt[c] == 0:
                    continue
                ln += cnt[c]
                ls += sm[c]
                rn = nn - ln
                if rn == 0:
                    break
                rs = total - ls
                proxy = ls * ls / ln + rs * rs / rn
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    best_code = c
        if best_f < 0:
            continue

        # next present code above the split, for the midpoint threshold
        f = best_f
        for c in range(uniques.shape[1]):
            cnt[c] = 0
        for i in range(start, end):
            cnt[codes[idx[i], f]] += 1
        hi_code = best_code + 1
        while cnt[hi_code] == 0:
            hi_code += 1
        lo_val = uniques[f, best_code]
        hi_val = uniques[f, hi_code]
        thr = 0.5 * (lo_val + hi_val)
        if not (lo_val <= thr < hi_val):
            thr = lo_val

        # partition idx[start:end] into codes <= best_code, then the rest
        i = start
        j = end - 1
        while i <= j:
            if codes[idx[i], f] <= best_code:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i

        feature[node] = f
        threshold[node] = thr
        gain[node] = best_proxy - parent_proxy
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is built first
        stack_node[top] = rnode
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lnode
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], n_node[:n_nodes], gain[:n_nodes])


@nb.njit(cache=True, nogil=True)
def _predict_tree(x, feature, threshold, left, right, value):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def build_tree(enc: EncodedFeatures, y: np.ndarray, rows: np.ndarray, max_depth: int,
               max_features: int, tree_seed: int) -> TreeArrays:
    """Grow one tree on ``rows`` of the encoded training matrix."""
    p = enc.codes.shape[1]
    arrays = _build(
        enc.codes, enc.uniques, enc.n_unique, enc.keys, enc.rank, enc.order,
        np.ascontiguousarray(y, dtype=np.float64), np.ascontiguousarray(rows, dtype=np.int64),
        int(max_depth), int(min(max_features, p)), np.uint64(tree_seed & _MASK),
    )
    return TreeArrays(*arrays)


def tree_seed(seed: int, *parts) -> int:
    return derive_seed("tree", seed, *parts)
