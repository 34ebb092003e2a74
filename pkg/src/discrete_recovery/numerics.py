"""Dense linear algebra and combinatorial primitives used by the models.

Everything here works on plain ``numpy`` arrays. The random generator is a
thin, versioned wrapper so that streams stay reproducible across numpy
releases: raw 64-bit words come from the PCG64 bit generator and Gaussian
variates are produced by Box-Muller on those words (numpy's own
``Generator.normal`` is not guaranteed stable between versions).
"""

import numpy as np

from .exceptions import ContractViolation, ConvergenceError

RNG_ALGORITHM = "pcg64+box-muller/v1"

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100

_TWO_NEG_53 = 2.0 ** -53


class Rng:
    """Seeded random stream with a stable, documented algorithm.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    spawn_key : tuple of int, optional
        Path identifying a child stream. ``Rng(s).child(g, r)`` and
        ``Rng(s, (g, r))`` are the same stream.

    Notes
    -----
    Seeds are expanded with :class:`numpy.random.SeedSequence`, whose hashing
    is frozen by numpy's compatibility policy, then fed to PCG64. Uniforms
    take the top 53 bits of each raw word.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed=0, spawn_key=()):
        seed = int(seed)
        if seed < 0 or seed >= 2 ** 64:
            raise ContractViolation(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(int(k) for k in spawn_key)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.spawn_key)
        self._bitgen = np.random.PCG64(seq)

    def __repr__(self):
        return f"Rng(seed={self.seed}, spawn_key={self.spawn_key})"

    def child(self, *key):
        """Independent stream derived from this seed and ``key``."""
        return Rng(self.seed, self.spawn_key + tuple(key))

    def _raw(self, n):
        return np.asarray(self._bitgen.random_raw(n), dtype=np.uint64)

    def uniform(self, size=None):
        """Uniform variates on [0, 1)."""
        shape = () if size is None else size
        n = int(np.prod(shape, dtype=np.int64))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53
        return u.reshape(shape) if size is not None else float(u[0])

    def standard_normal(self, size=None):
        shape = () if size is None else size
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[:m]  # (0, 1]
        u2 = u[m:]
        rad = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * m)
        z[0::2] = rad * np.cos(2.0 * np.pi * u2)
        z[1::2] = rad * np.sin(2.0 * np.pi * u2)
        z = z[:n]
        return z.reshape(shape) if size is not None else float(z[0])

    def integers(self, high, size=None):
        """Integers uniform on ``[0, high)``."""
        u = self.uniform(size)
        out = np.floor(np.asarray(u) * high).astype(np.int64)
        return out if size is not None else int(out)

    def permutation(self, n):
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n, m):
        """``m`` distinct indices from ``range(n)``."""
        if m > n:
            raise ContractViolation(f"cannot draw {m} distinct items from {n}")
        return self.permutation(n)[:m]

    def signs(self, size):
        return np.where(self.uniform(size) < 0.5, -1, 1).astype(np.int64)


def check_finite(A, name="matrix"):
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} has non-finite entries")
    return A


def gaussian_matrix(rng, rows, cols):
    """iid standard normal ``rows x cols`` matrix."""
    return rng.standard_normal((rows, cols))


def symmetric_gaussian(rng, p, zero_diag=True):
    """Symmetric matrix with iid N(0, 1) upper triangle mirrored below.

    The strict upper triangle is filled in row-major order from the stream.
    The diagonal is zero when ``zero_diag`` is set, otherwise it gets its
    own N(0, 1) draws after the off-diagonal ones.
    """
    iu = np.triu_indices(p, k=1)
    W = np.zeros((p, p))
    W[iu] = rng.standard_normal(len(iu[0]))
    W = W + W.T
    if not zero_diag:
        W[np.diag_indices(p)] = rng.standard_normal(p)
    return W


# --------------------------------------------------------------------------
# eigen / singular value decompositions


def _jacobi_eigh(A, tol, max_sweeps):
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    # convergence is quadratic, so iterate well past ``tol`` for a small cost
    target = max(tol * 1e-4, 1e-15) * scale
    for _ in range(max_sweeps):
        # direct norm; subtracting the diagonal mass from the total cancels badly
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps",
                           last_iterate=(np.diag(A).copy(), V))


def _fix_signs(V):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(V), axis=0)
    sgn = np.sign(V[idx, np.arange(V.shape[1])])
    sgn[sgn == 0] = 1.0
    return V * sgn


def sym_eig(A, top_r=None, tol=DEFAULT_TOL, method="lapack", max_sweeps=MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix, largest ``|lambda|`` first.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric within ``tol`` (relative to its Frobenius norm).
    top_r : int, optional
        Number of leading pairs to return; all by default.
    tol : float
        Relative accuracy target; every returned pair satisfies
        ``||A v - lam v|| <= tol * ||A||_F``.
    method : {"lapack", "jacobi"}
        ``"jacobi"`` runs a cyclic Jacobi sweep in pure numpy and is meant
        for small matrices; ``"lapack"`` calls ``numpy.linalg.eigh``.

    Returns
    -------
    eigenvalues : (r,) ndarray
        Ordered by decreasing absolute value (ties: larger value first).
    eigenvectors : (n, r) ndarray
        Orthonormal columns; each column's largest-magnitude entry is
        positive.
    """
    A = check_finite(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"sym_eig needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    r = n if top_r is None else int(top_r)
    if not 1 <= r <= n:
        raise ContractViolation(f"top_r must be in [1, {n}], got {r}")
    fro = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > tol * max(fro, 1.0):
        raise ContractViolation("sym_eig input is not symmetric within tolerance")
    S = 0.5 * (A + A.T)
    if method == "jacobi":
        vals, vecs = _jacobi_eigh(S, tol, max_sweeps)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(S)
    else:
        raise ContractViolation(f"unknown eigensolver {method!r}")
    order = np.lexsort((-vals, -np.abs(vals)))[:r]
    vals = vals[order]
    vecs = _fix_signs(vecs[:, order])
    resid = np.linalg.norm(S @ vecs - vecs * vals, axis=0)
    if fro > 0 and np.any(resid > tol * fro):
        raise ConvergenceError("eigenpair residual above tolerance", last_iterate=(vals, vecs))
    return vals, vecs


def _complete_columns(Q, good):
    """Replace columns of Q not flagged ``good`` by an orthonormal completion."""
    n, r = Q.shape
    if np.all(good):
        return Q
    basis = [Q[:, i] for i in range(r) if good[i]]
    out = Q.copy()
    e = 0
    for i in range(r):
        if good[i]:
            continue
        while True:
            v = np.zeros(n)
            v[e] = 1.0
            e += 1
            for b in basis:
                v -= (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                break
        v /= nv
        basis.append(v)
        out[:, i] = v
    return out


def truncated_svd(A, r, tol=DEFAULT_TOL, method="lapack"):
    """Leading ``r`` singular triplets.

    ``"lapack"`` calls ``numpy.linalg.svd``. ``"jacobi"`` diagonalizes the
    smaller Gram matrix, which resolves singular values only down to about
    ``1e-8 * s_1``; smaller ones are reported as zero with an orthonormal
    completion of the singular vectors.

    Returns
    -------
    U : (rows, r) ndarray
    s : (r,) ndarray, non-increasing and non-negative
    V : (cols, r) ndarray
    """
    A = check_finite(A)
    if A.ndim != 2:
        raise ContractViolation("truncated_svd needs a 2-d array")
    m, n = A.shape
    r = int(r)
    if not 1 <= r <= min(m, n):
        raise ContractViolation(f"r must be in [1, {min(m, n)}], got {r}")
    if method == "lapack":
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        U, V = U[:, :r], Vt[:r].T
        # same sign convention as sym_eig, applied to U and carried to V
        idx = np.argmax(np.abs(U), axis=0)
        sgn = np.sign(U[idx, np.arange(r)])
        sgn[sgn == 0] = 1.0
        return U * sgn, s[:r], V * sgn
    wide = m <= n
    G = A @ A.T if wide else A.T @ A
    vals, vecs = sym_eig(G, top_r=r, tol=tol, method=method)
    vals = np.maximum(vals, 0.0)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    s = np.sqrt(vals)
    floor = s[0] * 1e-7
    good = s > floor
    other = (A.T @ vecs) if wide else (A @ vecs)
    other[:, good] /= s[good]
    other[:, ~good] = 0.0
    other = _complete_columns(other, good)
    s = np.where(good, s, 0.0)
    if wide:
        return vecs, s, other
    return other, s, vecs


# --------------------------------------------------------------------------
# assignment


def hungarian_min(cost):
    """Exact minimum-cost perfect matching on a square cost matrix.

    Shortest augmenting path with potentials, O(n^3).

    Returns
    -------
    assignment : (n,) ndarray of int
        Row ``i`` is matched to column ``assignment[i]``.
    total : float
    """
    C = check_finite(cost, "cost")
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ContractViolation(f"hungarian_min needs a square matrix, got shape {C.shape}")
    n = C.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[col] = row (1-based), 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assignment = np.zeros(n, dtype=np.int64)
    for j in range(1, n + 1):
        assignment[match[j] - 1] = j - 1
    total = float(C[np.arange(n), assignment].sum())
    return assignment, total


# --------------------------------------------------------------------------
# sorted-l1 proximal map


def _pava_nonincreasing(w):
    """Euclidean projection onto the non-increasing cone (pool adjacent violators)."""
    sums, counts = [], []
    for x in w:
        sums.append(float(x))
        counts.append(1)
        while len(sums) > 1 and sums[-1] / counts[-1] > sums[-2] / counts[-2]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    return np.repeat([s / c for s, c in zip(sums, counts)], counts)


def slope_prox(v, weights):
    """Proximal map of the sorted-l1 norm ``sum_i weights[i] * |x|_(i)``.

    ``weights`` must be non-negative and non-increasing; ``|x|_(1)`` is the
    largest magnitude.
    """
    v = check_finite(np.ravel(v), "v")
    w = check_finite(np.ravel(weights), "weights")
    if v.shape != w.shape:
        raise ContractViolation(f"length mismatch: {v.size} values, {w.size} weights")
    if np.any(w < 0):
        raise ContractViolation("weights must be non-negative")
    if np.any(np.diff(w) > 0):
        raise ContractViolation("weights must be non-increasing")
    if v.size == 0:
        return v.copy()
    mag = np.abs(v)
    order = np.argsort(-mag, kind="stable")
    proj = np.maximum(_pava_nonincreasing(mag[order] - w), 0.0)
    out = np.empty_like(v)
    out[order] = proj
    return np.sign(v) * out


def sorted_l1_norm(x, weights):
    mag = np.sort(np.abs(np.ravel(x)))[::-1]
    return float(np.dot(mag, weights))
