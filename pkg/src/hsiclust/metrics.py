"""Partition-comparison scores: mutual information and its chance-adjusted form.

All quantities use natural logarithms. The adjusted score divides the
centered mutual information by ``max(E(G), E(L)) - EMI`` where EMI is the
exact expectation of MI over random relabelings that preserve both cluster
size profiles (the hypergeometric permutation model), so a random clustering
scores near zero and a perfect one scores exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass
class ContingencyTable:
    """Joint cluster-overlap counts between two partitions of one sample set."""

    counts: np.ndarray  # (groups in g, groups in l)
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    n: int

    def __post_init__(self):
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        self.row_marginals = np.ascontiguousarray(self.row_marginals, dtype=np.int64)
        self.col_marginals = np.ascontiguousarray(self.col_marginals, dtype=np.int64)
        if self.counts.sum() != self.n:
            raise ParameterError("contingency counts do not sum to n")
        if not np.array_equal(self.counts.sum(axis=1), self.row_marginals):
            raise ParameterError("row marginals inconsistent with counts")
        if not np.array_equal(self.counts.sum(axis=0), self.col_marginals):
            raise ParameterError("column marginals inconsistent with counts")


def _as_labels(p) -> np.ndarray:
    labels = np.asarray(getattr(p, "labels", p))
    if labels.ndim != 1:
        raise ParameterError("partition labels must be a 1-D vector")
    return labels


def contingency(g, l) -> ContingencyTable:
    """Overlap counts |G_i ∩ L_j|; labels unused by either side are dropped."""
    g_labels = _as_labels(g)
    l_labels = _as_labels(l)
    if g_labels.size != l_labels.size:
        raise ParameterError(
            f"partition lengths differ ({g_labels.size} vs {l_labels.size})"
        )
    n = int(g_labels.size)
    if n < 1:
        raise ParameterError("partitions must be nonempty")
    _, gi = np.unique(g_labels, return_inverse=True)
    _, li = np.unique(l_labels, return_inverse=True)
    r, c = gi.max() + 1, li.max() + 1
    counts = np.bincount(gi * c + li, minlength=r * c).reshape(r, c)
    return ContingencyTable(
        counts=counts,
        row_marginals=counts.sum(axis=1),
        col_marginals=counts.sum(axis=0),
        n=n,
    )


def mutual_information(t: ContingencyTable) -> float:
    """MI in nats; empty cells contribute nothing."""
    n = t.n
    i, j = np.nonzero(t.counts)
    nij = t.counts[i, j].astype(np.float64)
    outer = t.row_marginals[i].astype(np.float64) * t.col_marginals[j]
    mi = float(np.sum(nij / n * (np.log(n * nij) - np.log(outer))))
    return max(mi, 0.0)


def entropy(marginals, n: int) -> float:
    """Shannon entropy of cluster sizes in nats; 0 log 0 counts as zero."""
    marginals = np.asarray(marginals, dtype=np.float64)
    if marginals.sum() != n:
        raise ParameterError("marginals do not sum to n")
    p = marginals[marginals > 0] / n
    return float(-(p * np.log(p)).sum())


def expected_mi(t: ContingencyTable) -> float:
    """Exact expectation of MI under marginal-preserving random relabelings.

    Every cell's overlap count follows a hypergeometric law; the expectation
    sums each achievable overlap times its probability and its MI term.
    Probabilities are assembled from cached log-factorials so large counts
    stay in range.
    """
    n = t.n
    a = t.row_marginals
    b = t.col_marginals
    # log(x!) for x in 0..n
    lf = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))
    log_n = np.log(n)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1)
            log_prob = (
                lf[ai]
                + lf[bj]
                + lf[n - ai]
                + lf[n - bj]
                - lf[n]
                - lf[nij]
                - lf[ai - nij]
                - lf[bj - nij]
                - lf[n - ai - bj + nij]
            )
            terms = nij / n * (log_n + np.log(nij) - np.log(float(ai) * bj))
            emi += float(np.sum(np.exp(log_prob) * terms))
    return emi


def _identical_as_set_partitions(t: ContingencyTable) -> bool:
    return bool(
        np.all((t.counts > 0).sum(axis=1) == 1) and np.all((t.counts > 0).sum(axis=0) == 1)
    )


def ami(g, l) -> float:
    """Adjusted mutual information of two equal-length partitions.

    Returns ``(MI - EMI) / (max(E(G), E(L)) - EMI)``. When the denominator
    vanishes (both partitions trivial) the score is 1.0 for identical set
    partitions and 0.0 otherwise.
    """
    t = contingency(g, l)
    mi = mutual_information(t)
    emi = expected_mi(t)
    e_g = entropy(t.row_marginals, t.n)
    e_l = entropy(t.col_marginals, t.n)
    denom = max(e_g, e_l) - emi
    if denom <= 1e-12:
        return 1.0 if _identical_as_set_partitions(t) else 0.0
    return (mi - emi) / denom


def summarize(g, l) -> dict:
    """All partition-comparison numbers in one JSON-friendly mapping."""
    t = contingency(g, l)
    mi = mutual_information(t)
    emi = expected_mi(t)
    e_g = entropy(t.row_marginals, t.n)
    e_l = entropy(t.col_marginals, t.n)
    denom = max(e_g, e_l) - emi
    if denom <= 1e-12:
        score = 1.0 if _identical_as_set_partitions(t) else 0.0
    else:
        score = (mi - emi) / denom
    return {
        "ami": score,
        "mi": mi,
        "entropy_g": e_g,
        "entropy_l": e_l,
        "emi": emi,
        "n": t.n,
        "clusters_g": int(t.counts.shape[0]),
        "clusters_l": int(t.counts.shape[1]),
    }
