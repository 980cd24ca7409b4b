"""Pure-numpy Fock-propagation kernels.

A state with ``s`` photons in ``K`` output rows is a complex array whose
first axis is indexed by the compositions ``(m_0, ..., m_{K-1})`` of ``s``,
ordered lexicographically in ``(m_0, ..., m_{K-2})`` (the last part absorbs
the remainder).  Further axes hold independent states propagated together.
The rank of a composition is

    sum_i [C(r_i + K-1-i, K-1-i) - C(r_i - m_i + K-1-i, K-1-i)],

with ``r_0 = s`` and ``r_{i+1} = r_i - m_i``.

A two-mode unitary on rows ``(p, q)`` only mixes configurations that agree
outside ``p`` and ``q``; within such a group it acts through its
``(n+1) x (n+1)`` representation, ``n = m_p + m_q``.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=4096)
def _compositions(s, k):
    if k == 1:
        return np.array([[s]], dtype=np.int32)
    blocks = []
    for m0 in range(s + 1):
        sub = _compositions(s - m0, k - 1)
        blocks.append(np.column_stack((np.full(len(sub), m0, np.int32), sub)))
    return np.vstack(blocks)


def compositions(s, k):
    """All compositions of ``s`` into ``k`` parts in rank order."""
    if k == 1:
        return _compositions(s, 1)
    # the top level is not cached: it is the largest array
    blocks = []
    for m0 in range(s + 1):
        sub = _compositions(s - m0, k - 1)
        blocks.append(np.column_stack((np.full(len(sub), m0, np.int32), sub)))
    return np.vstack(blocks)


def rank(comps, s, binom):
    k = comps.shape[1]
    r = np.zeros(len(comps), np.int64)
    rem = np.full(len(comps), s, np.int64)
    for i in range(k - 1):
        j = k - 1 - i
        r += binom[rem + j, j] - binom[rem - comps[:, i] + j, j]
        rem -= comps[:, i]
    return r


def binomial_table(n_max, k):
    """``C(n, j)`` for ``n <= n_max + k``, ``j <= k`` as int64."""
    n = np.arange(n_max + k + 1)[:, None]
    tab = np.ones((n_max + k + 1, k + 1), dtype=np.int64)
    for j in range(1, k + 1):
        tab[:, j] = tab[:, j - 1] * (n[:, 0] - j + 1) // j
    return tab


@lru_cache(maxsize=8)
def _groups(s, k, p, q):
    binom = binomial_table(s, k)
    comps = compositions(s, k)
    heads = comps[comps[:, p] == 0]
    out = {}
    for n in np.unique(heads[:, q]):
        h = heads[heads[:, q] == n]
        idx = np.empty((len(h), n + 1), np.int64)
        member = h.copy()
        for j in range(n + 1):
            member[:, p] = j
            member[:, q] = n - j
            idx[:, j] = rank(member, s, binom)
        out[int(n)] = idx
    return out


def apply_two_mode(state, s, k, p, q, rep_flat, rep_off):
    """Apply a two-mode unitary on rows ``(p, q)`` to ``state``.

    ``rep_flat[rep_off[n]:rep_off[n] + (n+1)**2]`` is the row-major
    ``(n+1) x (n+1)`` representation on ``n`` photons, in the basis
    ``m_p = 0..n``.
    """
    state = np.asarray(state)
    new = np.empty_like(state)
    for n, idx in _groups(s, k, p, q).items():
        rep = rep_flat[rep_off[n]: rep_off[n] + (n + 1) ** 2].reshape(n + 1, n + 1)
        x = state[idx]
        new[idx] = np.einsum("kj,gj...->gk...", rep, x)
    return new


def detector_probs(state, s, row_det, n_det):
    """Aggregate ``|amplitude|^2`` onto detector counts; loss rows have ``row_det < 0``."""
    row_det = np.asarray(row_det)
    comps = compositions(s, row_det.size)
    lin = np.zeros(len(comps), np.int64)
    for d in range(n_det):
        lin = lin * (s + 1) + comps[:, row_det == d].sum(axis=1)
    p = state.real**2 + state.imag**2
    out = np.bincount(lin, weights=p, minlength=(s + 1) ** n_det)
    return out.reshape((s + 1,) * n_det)
