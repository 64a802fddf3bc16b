"""Fourth-order hierarchical Tucker tensors on the fixed tree ``{{1,2},{3,4}}``.

Storage layout::

    f[i1,i2,j1,j2] = sum_{k,l} root[k,l] * U12[i1,i2,k] * U34[j1,j2,l]
    U12[i1,i2,k]   = sum_{a,b} B12[a,b,k] * U[0][i1,a] * U[1][i2,b]
    U34[j1,j2,l]   = sum_{a,b} B34[a,b,l] * U[2][j1,a] * U[3][j2,b]

Leaves are numbered 1..4 in the public API (``x1, x2, v1, v2``) and stored
0-based in ``U``.  ``orthogonal`` means every leaf frame has orthonormal
columns and ``B12``/``B34`` have orthonormal columns when matricised with
the parent index as the column index; then ``||f||_F = ||root||_F``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .lowrank import LowRankMatrix, tail_rank

DENSE_GUARD = 2**24
FORMAT_VERSION = 1


class DenseGuardError(MemoryError):
    pass


@dataclass(frozen=True)
class RankTuple:
    r1: int
    r2: int
    r3: int
    r4: int
    r12: int
    r34: int

    def as_tuple(self) -> tuple[int, ...]:
        return (self.r1, self.r2, self.r3, self.r4, self.r12, self.r34)

    def __iter__(self):
        return iter(self.as_tuple())

    def __getitem__(self, i):
        return self.as_tuple()[i]


@dataclass(frozen=True, eq=False)
class HTensor:
    U: tuple
    B12: np.ndarray
    B34: np.ndarray
    root: np.ndarray
    orthogonal: bool = False

    def __post_init__(self):
        U = tuple(np.asarray(u, dtype=float) for u in self.U)
        if len(U) != 4 or any(u.ndim != 2 for u in U):
            raise ValueError("need four 2-D leaf frames")
        B12 = np.asarray(self.B12, float)
        B34 = np.asarray(self.B34, float)
        root = np.asarray(self.root, float)
        if B12.shape[:2] != (U[0].shape[1], U[1].shape[1]):
            raise ValueError(f"B12 {B12.shape} does not match leaf ranks")
        if B34.shape[:2] != (U[2].shape[1], U[3].shape[1]):
            raise ValueError(f"B34 {B34.shape} does not match leaf ranks")
        if root.shape != (B12.shape[2], B34.shape[2]):
            raise ValueError(f"root {root.shape} does not match node ranks")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "B12", B12)
        object.__setattr__(self, "B34", B34)
        object.__setattr__(self, "root", root)

    @property
    def ranks(self) -> RankTuple:
        return RankTuple(*(u.shape[1] for u in self.U), self.B12.shape[2],
                         self.B34.shape[2])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.U)

    def storage(self) -> int:
        return (sum(u.size for u in self.U) + self.B12.size + self.B34.size
                + self.root.size)

    def dense(self) -> np.ndarray:
        n = int(np.prod(self.shape))
        if n > DENSE_GUARD:
            raise DenseGuardError(f"dense evaluation of {n} entries exceeds guard")
        U12 = np.einsum("ia,jb,abk->ijk", self.U[0], self.U[1], self.B12)
        U34 = np.einsum("ia,jb,abk->ijk", self.U[2], self.U[3], self.B34)
        return np.einsum("ijk,kl,abl->ijab", U12, self.root, U34)

    def frame12(self) -> np.ndarray:
        return np.einsum("ia,jb,abk->ijk", self.U[0], self.U[1], self.B12)

    def frame34(self) -> np.ndarray:
        return np.einsum("ia,jb,abk->ijk", self.U[2], self.U[3], self.B34)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, alpha):
        return scale(self, alpha)

    __rmul__ = __mul__


def zeros(shape: Sequence[int]) -> HTensor:
    return HTensor(tuple(np.zeros((n, 0)) for n in shape), np.zeros((0, 0, 0)),
                   np.zeros((0, 0, 0)), np.zeros((0, 0)), True)


def _unique_columns(vectors):
    """Deduplicate equal vectors; return (stacked frame, index per input)."""
    uniq, idx = [], []
    for v in vectors:
        for k, u in enumerate(uniq):
            if u.shape == v.shape and np.array_equal(u, v):
                idx.append(k)
                break
        else:
            uniq.append(v)
            idx.append(len(uniq) - 1)
    return np.column_stack(uniq), idx


def ht_from_separable(terms: Sequence[tuple]) -> HTensor:
    """Exact HT form of ``sum c * u1 (x) u2 (x) u3 (x) u4``.

    Equal leaf vectors and equal leaf pairs are merged, so ranks count
    distinct vectors rather than terms.
    """
    if len(terms) == 0:
        raise ValueError("need at least one term")
    vecs = [[np.asarray(t[d], float) for t in terms] for d in range(4)]
    coeffs = [float(t[4]) if len(t) > 4 else 1.0 for t in terms]
    for d in range(4):
        if len({v.shape for v in vecs[d]}) != 1:
            raise ValueError(f"inconsistent lengths on leaf {d + 1}")
    frames, idx = zip(*(_unique_columns(vecs[d]) for d in range(4)))
    pairs12 = list(dict.fromkeys(zip(idx[0], idx[1])))
    pairs34 = list(dict.fromkeys(zip(idx[2], idx[3])))
    B12 = np.zeros((frames[0].shape[1], frames[1].shape[1], len(pairs12)))
    for k, (a, b) in enumerate(pairs12):
        B12[a, b, k] = 1.0
    B34 = np.zeros((frames[2].shape[1], frames[3].shape[1], len(pairs34)))
    for k, (a, b) in enumerate(pairs34):
        B34[a, b, k] = 1.0
    root = np.zeros((len(pairs12), len(pairs34)))
    for t, c in enumerate(coeffs):
        k = pairs12.index((idx[0][t], idx[1][t]))
        m = pairs34.index((idx[2][t], idx[3][t]))
        root[k, m] += c
    return HTensor(frames, B12, B34, root)


def scale(f: HTensor, alpha: float) -> HTensor:
    return HTensor(f.U, f.B12, f.B34, alpha * f.root, f.orthogonal)


def _block_transfer(Ba, Bb):
    ra, rb = Ba.shape, Bb.shape
    out = np.zeros((ra[0] + rb[0], ra[1] + rb[1], ra[2] + rb[2]))
    out[:ra[0], :ra[1], :ra[2]] = Ba
    out[ra[0]:, ra[1]:, ra[2]:] = Bb
    return out


def ht_add(a: HTensor, b: HTensor) -> HTensor:
    """Block-diagonal concatenation; ranks add node-wise."""
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    U = tuple(np.hstack([ua, ub]) for ua, ub in zip(a.U, b.U))
    root = np.zeros((a.root.shape[0] + b.root.shape[0],
                     a.root.shape[1] + b.root.shape[1]))
    root[:a.root.shape[0], :a.root.shape[1]] = a.root
    root[a.root.shape[0]:, a.root.shape[1]:] = b.root
    return HTensor(U, _block_transfer(a.B12, b.B12), _block_transfer(a.B34, b.B34),
                   root)


def leaf_apply(f: HTensor, dim: int, op) -> HTensor:
    """Replace leaf ``dim`` (1..4) by ``op`` applied to its frame.

    ``op`` may be a matrix, a callable on ``(N, r)`` arrays, or a vector
    (element-wise scaling of every column).
    """
    if dim not in (1, 2, 3, 4):
        raise ValueError(f"leaf index must be in 1..4, got {dim}")
    U = list(f.U)
    u = U[dim - 1]
    if callable(op):
        new = op(u)
    else:
        op = np.asarray(op, float)
        if op.ndim == 1:
            if op.shape[0] != u.shape[0]:
                raise ValueError("vector length does not match leaf size")
            new = op[:, None] * u
        else:
            if op.shape[1] != u.shape[0]:
                raise ValueError("operator shape does not match leaf size")
            new = op @ u
    U[dim - 1] = np.asarray(new, float)
    return HTensor(tuple(U), f.B12, f.B34, f.root)


def ht_scale_v(f: HTensor, which, vec) -> HTensor:
    """Element-wise velocity scaling: ``which`` is 3, 4 or ``"both"``.

    For ``"both"``, ``vec`` is a pair ``(w1, w2)``.
    """
    if which == "both":
        w1, w2 = vec
        return leaf_apply(leaf_apply(f, 3, w1), 4, w2)
    if which not in (3, 4):
        raise ValueError("which must be 3, 4 or 'both'")
    return leaf_apply(f, which, vec)


def _qr(a):
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0)), np.zeros((0, 0))
    return np.linalg.qr(a)


def ht_sum(terms: Sequence[HTensor], coeffs: Iterable[float] | None = None
           ) -> HTensor:
    """Orthogonal HT form of ``sum_t c_t * terms[t]``.

    Leaf frames shared between terms (same array object) are stacked once.
    Leaves are QR-factored first, so leaf ranks never exceed the grid size
    and no block-diagonal transfer tensor is ever materialised.
    """
    terms = list(terms)
    coeffs = [1.0] * len(terms) if coeffs is None else list(coeffs)
    shape = terms[0].shape
    for t in terms[1:]:
        if t.shape != shape:
            raise ValueError(f"grid mismatch: {shape} vs {t.shape}")

    # Leaves: stack distinct frames, then one QR per leaf.
    Q, R, offsets = [], [], []
    for d in range(4):
        seen: dict[int, int] = {}
        blocks, offs, pos = [], [], 0
        for t in terms:
            u = t.U[d]
            key = id(u)
            if key not in seen:
                seen[key] = pos
                blocks.append(u)
                pos += u.shape[1]
            offs.append(seen[key])
        q, r = _qr(np.hstack(blocks))
        Q.append(q)
        R.append(r)
        offsets.append(offs)

    def node(d0, d1, attr):
        cols = []
        for t_i, t in enumerate(terms):
            B = getattr(t, attr)
            o0, o1 = offsets[d0][t_i], offsets[d1][t_i]
            R0 = R[d0][:, o0:o0 + B.shape[0]]
            R1 = R[d1][:, o1:o1 + B.shape[1]]
            cols.append(np.einsum("ia,jb,abk->ijk", R0, R1, B, optimize=True))
        q0, q1 = R[d0].shape[0], R[d1].shape[0]
        stacked = np.concatenate(cols, axis=2)
        qn, rn = _qr(stacked.reshape(q0 * q1, -1))
        return qn.reshape(q0, q1, -1), rn

    B12, R12 = node(0, 1, "B12")
    B34, R34 = node(2, 3, "B34")
    root = np.zeros((R12.shape[0], R34.shape[0]))
    o12 = o34 = 0
    for c, t in zip(coeffs, terms):
        k12, k34 = t.root.shape
        if k12 and k34:
            root += c * (R12[:, o12:o12 + k12] @ t.root @ R34[:, o34:o34 + k34].T)
        o12 += k12
        o34 += k34
    return HTensor(tuple(Q), B12, B34, root, True)


def orthogonalize(f: HTensor) -> HTensor:
    """QR sweep leaves-to-root; dense value unchanged."""
    if f.orthogonal:
        return f
    return ht_sum([f])


def norm(f: HTensor) -> float:
    return float(np.linalg.norm(orthogonalize(f).root))


def _zero_like(f: HTensor) -> HTensor:
    return zeros(f.shape)


def truncation_factors(f: HTensor):
    """Singular values and left vectors of each node matricisation.

    ``f`` must be orthogonal.  Uses square-root factors of the reduced Gram
    matrices (small SVDs), never an ``N x N`` object.  Returns a dict keyed
    by ``1, 2, 3, 4, 12`` with ``(left, sigma)`` and, under key ``34``, the
    right singular vectors of the root.
    """
    P, s, Qt = np.linalg.svd(f.root, full_matrices=False)
    # X12 = root, so G12 = root root^T; the children of 12 see B12 x3 root^T.
    X1 = np.einsum("abk,kl->abl", f.B12, P * s)  # (r1, r2, p)
    X3 = np.einsum("abl,lk->abk", f.B34, Qt.T * s)
    out = {12: (P, s), 34: (Qt.T, s)}
    for key, X, axis in ((1, X1, 0), (2, X1, 1), (3, X3, 0), (4, X3, 1)):
        M = np.moveaxis(X, axis, 0).reshape(X.shape[axis], -1)
        if M.size == 0:
            out[key] = (np.zeros((X.shape[axis], 0)), np.zeros(0))
            continue
        Ul, sl, _ = np.linalg.svd(M, full_matrices=False)
        out[key] = (Ul, sl)
    return out


def ht_truncate(f: HTensor, eps: float, node_eps: dict | None = None,
                max_rank: int | None = None) -> HTensor:
    """Root-to-leaf hierarchical HOSVD truncation.

    Each of the five truncated nodes (four leaves plus the root split) drops
    the smallest singular tail with 2-norm at most ``eps``, so
    ``||f - T(f)||_F <= sqrt(5) * eps``.  ``node_eps`` overrides the budget
    per node key (1, 2, 3, 4, 12).  The result is orthogonal.
    """
    f = orthogonalize(f)
    if f.root.size == 0:
        return _zero_like(f)
    budget = {k: eps for k in (1, 2, 3, 4, 12)}
    if node_eps:
        budget.update(node_eps)
    fac = truncation_factors(f)
    keep = {}
    for k in (1, 2, 3, 4, 12):
        r = tail_rank(fac[k][1], budget[k])
        if max_rank is not None:
            r = min(r, max_rank)
        keep[k] = r
    if min(keep.values()) == 0:
        return _zero_like(f)
    Y = {k: fac[k][0][:, :keep[k]] for k in (1, 2, 3, 4, 12)}
    Y[34] = fac[34][0][:, :keep[12]]
    U = tuple(f.U[d] @ Y[d + 1] for d in range(4))
    B12 = np.einsum("abk,ai,bj,kl->ijl", f.B12, Y[1], Y[2], Y[12], optimize=True)
    B34 = np.einsum("abk,ai,bj,kl->ijl", f.B34, Y[3], Y[4], Y[34], optimize=True)
    root = Y[12].T @ f.root @ Y[34]
    return orthogonalize(HTensor(U, B12, B34, root))


def truncate_leaves12(f: HTensor, eps: float) -> HTensor:
    """Compress leaves 1 and 2 only, keeping ``r12``, ``r34`` and the (3,4) subtree.

    Each leaf drops a singular tail of 2-norm at most ``eps`` of the
    corresponding matricisation of the node-(1,2) frame, weighted by the root.
    """
    Q1, R1 = _qr(f.U[0])
    Q2, R2 = _qr(f.U[1])
    B = np.einsum("ia,jb,abk->ijk", R1, R2, f.B12)
    Q3, R3 = _qr(f.U[2])
    Q4, R4 = _qr(f.U[3])
    B34 = np.einsum("ia,jb,abk->ijk", R3, R4, f.B34)
    q34, r34 = _qr(B34.reshape(-1, B34.shape[2]))
    X = np.einsum("abk,kl->abl", B, f.root @ r34.T)
    keep = []
    for axis in (0, 1):
        M = np.moveaxis(X, axis, 0).reshape(X.shape[axis], -1)
        Ul, s, _ = np.linalg.svd(M, full_matrices=False)
        keep.append(Ul[:, :max(tail_rank(s, eps), 1)])
    Bn = np.einsum("abk,ai,bj->ijk", B, keep[0], keep[1])
    return HTensor((Q1 @ keep[0], Q2 @ keep[1], f.U[2], f.U[3]), Bn, f.B34, f.root)


def ht_moments(f: HTensor, v1axis, v2axis):
    """Velocity moments ``(rho, J1, J2, kappa)`` as low-rank matrices over (x1, x2)."""
    S = velocity_functionals(f, v1axis, v2axis)  # (4, r34)
    y = S @ f.root.T  # (4, r12)
    out = []
    for m in range(4):
        K = np.einsum("abk,k->ab", f.B12, y[m])
        out.append(LowRankMatrix(np.ones(K.shape[1]), f.U[0] @ K, f.U[1]))
    return tuple(out)


def velocity_functionals(f: HTensor, v1axis, v2axis) -> np.ndarray:
    """``<U34_l, g_m>`` for ``g = 1, v1, v2, (v1^2 + v2^2)/2``; shape ``(4, r34)``."""
    v1, v2 = v1axis.points, v2axis.points
    g3 = v1axis.h * (f.U[2].T @ np.column_stack([np.ones_like(v1), v1, 0.5 * v1**2]))
    g4 = v2axis.h * (f.U[3].T @ np.column_stack([np.ones_like(v2), v2, 0.5 * v2**2]))
    B = f.B34
    S = np.empty((4, B.shape[2]))
    S[0] = np.einsum("abl,a,b->l", B, g3[:, 0], g4[:, 0])
    S[1] = np.einsum("abl,a,b->l", B, g3[:, 1], g4[:, 0])
    S[2] = np.einsum("abl,a,b->l", B, g3[:, 0], g4[:, 1])
    S[3] = (np.einsum("abl,a,b->l", B, g3[:, 2], g4[:, 0])
            + np.einsum("abl,a,b->l", B, g3[:, 0], g4[:, 2]))
    return S


def save_htensor(f: HTensor, path) -> Path:
    """Write an ``.npz`` container; see README for the key layout."""
    path = Path(path)
    meta = np.array([FORMAT_VERSION, int(f.orthogonal), *f.ranks.as_tuple()],
                    dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, format="conslr-htensor", meta=meta, U1=f.U[0], U2=f.U[1],
                 U3=f.U[2], U4=f.U[3], B12=f.B12, B34=f.B34, root=f.root)
    return path


def load_htensor(path) -> HTensor:
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != "conslr-htensor":
            raise ValueError(f"{path}: not an HTensor container")
        meta = z["meta"]
        if int(meta[0]) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {int(meta[0])}")
        f = HTensor((z["U1"], z["U2"], z["U3"], z["U4"]), z["B12"], z["B34"],
                    z["root"], bool(meta[1]))
    if f.ranks.as_tuple() != tuple(int(r) for r in meta[2:]):
        raise ValueError(f"{path}: rank record does not match arrays")
    return f


def map_leaves(f: HTensor, ops: dict[int, Callable | np.ndarray]) -> HTensor:
    """Apply several leaf operators at once; leaves not in ``ops`` are shared."""
    U = list(f.U)
    for dim, op in ops.items():
        u = U[dim - 1]
        if callable(op):
            U[dim - 1] = op(u)
        else:
            op = np.asarray(op, float)
            U[dim - 1] = op[:, None] * u if op.ndim == 1 else op @ u
    return HTensor(tuple(U), f.B12, f.B34, f.root)
