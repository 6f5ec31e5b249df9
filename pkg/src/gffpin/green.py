"""Dirichlet Laplacian eigenbasis, Green functions and harmonic machinery.

Conventions.  The field energy puts weight (phi_x - phi_y)^2 / 2 on every
undirected edge with at least one endpoint in the interior, so the
interior precision matrix is A = -Delta (+ m^2) where Delta is the
generator of the continuous-time walk with rate one per edge (total jump
rate 2d).  The field covariance is G = A^{-1}, the Green function of that
walk killed on the boundary (killed at an independent rate-m^2
exponential clock in the massive case).  Tables normalized for the
rate-one discrete walk must be divided by 2d to match this convention.

Two independent algorithms are shipped for the box Green function: the
tensor sine eigenexpansion and a direct sparse solve of A G = I; the test
suite cross-validates them.  The infinite-volume Green function is an
adaptive quadrature of the Bessel-product representation

    G^m(0, x) = int_0^inf exp(-m^2 t) prod_i exp(-2t) I_{x_i}(2t) dt,

split over log-spaced panels (the integrand decays like t^{-d/2}).
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import ive, ndtr

from .lattice import Box, ConfigError

__all__ = [
    "SpectralBasis",
    "GreenTable",
    "spectral_basis",
    "green_box",
    "green_box_diagonal",
    "green_infinite",
    "sigma_d_squared",
    "sigma_m_squared",
    "poisson_kernel",
    "harmonic_extension",
    "harmonic_variance",
    "green_sum_sup",
    "save_green_table",
    "load_green_table",
]


# ----------------------------------------------------------------------
# spectral basis
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBasis:
    """Sine eigenbasis of the 1-d Dirichlet Laplacian on {0..N}.

    eigenvalues[i-1] = 2(1 - cos(i pi / N)) for i = 1..N-1; the vectors
    u_i(k) = sqrt(2/N) sin(i k pi / N) are orthonormal on the interior.
    """

    N: int
    eigenvalues: np.ndarray

    def vector(self, i: int, k=None) -> np.ndarray:
        """u_i evaluated at sites k (default: interior sites 1..N-1)."""
        if k is None:
            k = np.arange(1, self.N)
        k = np.asarray(k)
        return np.sqrt(2.0 / self.N) * np.sin(i * k * np.pi / self.N)

    @property
    def matrix(self) -> np.ndarray:
        """(N-1) x (N-1) orthonormal matrix, rows = eigenvectors on the interior."""
        i = np.arange(1, self.N)[:, None]
        k = np.arange(1, self.N)[None, :]
        return np.sqrt(2.0 / self.N) * np.sin(i * k * np.pi / self.N)


def spectral_basis(N: int) -> SpectralBasis:
    if N < 2:
        raise ValueError(f"need N >= 2 for a nonempty interior, got {N}")
    i = np.arange(1, N)
    return SpectralBasis(N=N, eigenvalues=2.0 * (1.0 - np.cos(i * np.pi / N)))


def _eig_sum_grid(d: int, N: int, m: float) -> np.ndarray:
    """Array of shape (N-1,)*d holding sum_axes lambda_i + m^2."""
    lam = spectral_basis(N).eigenvalues
    total = np.zeros((N - 1,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = N - 1
        total = total + lam.reshape(shape)
    return total + m * m


# ----------------------------------------------------------------------
# box Green function
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GreenTable:
    """Dense symmetric covariance G(x, y) over the interior of a box."""

    box: Box
    m: float
    matrix: np.ndarray

    def index_of(self, site) -> int:
        rel = np.asarray(site, dtype=np.int64) - np.asarray(self.box.offset)
        if ((rel <= 0) | (rel >= self.box.N)).any():
            raise ValueError(f"site {site!r} not in the interior")
        return int(np.ravel_multi_index(tuple(rel - 1), (self.box.N - 1,) * self.box.d))

    def entry(self, x, y) -> float:
        return float(self.matrix[self.index_of(x), self.index_of(y)])

    def variance(self, x) -> float:
        i = self.index_of(x)
        return float(self.matrix[i, i])

    def submatrix(self, sites) -> np.ndarray:
        idx = np.array([self.index_of(s) for s in np.atleast_2d(sites)])
        return self.matrix[np.ix_(idx, idx)]


_DENSE_GUARD = 10**5


def _interior_operator(d: int, N: int, m: float):
    """Sparse A = (2d + m^2) I - interior adjacency, row-major site order."""
    n_axis = N - 1
    n = n_axis**d
    eye = scipy.sparse.identity(n_axis, format="csr")
    path = scipy.sparse.diags([np.ones(n_axis - 1)] * 2, [-1, 1], format="csr")
    adj = scipy.sparse.csr_matrix((n, n))
    for axis in range(d):
        mats = [eye] * d
        mats[axis] = path
        term = mats[0]
        for other in mats[1:]:
            term = scipy.sparse.kron(term, other, format="csr")
        adj = adj + term
    return (2 * d + m * m) * scipy.sparse.identity(n, format="csr") - adj


@lru_cache(maxsize=16)
def _interior_factor(d: int, N: int, m: float):
    return scipy.sparse.linalg.splu(_interior_operator(d, N, m).tocsc())


def green_box(box_or_d, N: int | None = None, m: float = 0.0, method: str = "spectral") -> GreenTable:
    """Dense Green table on the interior of the box.

    method='spectral' uses the tensor eigenexpansion
    sum_modes v(x) v(y) / (sum lambda + m^2); method='solve' inverts the
    interior operator directly.  The two agree to solver precision and are
    cross-checked in the tests.
    """
    box = box_or_d if isinstance(box_or_d, Box) else Box(d=box_or_d, N=N)
    if m < 0:
        raise ValueError("mass must be nonnegative")
    d, N = box.d, box.N
    n = (N - 1) ** d
    if n > _DENSE_GUARD:
        raise ConfigError(f"interior has {n} sites; dense table guarded at {_DENSE_GUARD}")
    if method == "spectral":
        U1 = spectral_basis(N).matrix  # orthonormal, symmetric
        U = U1
        for _ in range(d - 1):
            U = np.kron(U, U1)
        G = (U / _eig_sum_grid(d, N, m).ravel()) @ U.T
    elif method == "solve":
        lu = _interior_factor(d, N, m)
        G = lu.solve(np.eye(n))
    else:
        raise ValueError(f"unknown method {method!r}")
    G = 0.5 * (G + G.T)
    return GreenTable(box=box, m=m, matrix=G)


def green_box_diagonal(d: int, N: int, m: float = 0.0, site=None) -> float:
    """G_box(x, x) by mode sums, O(N^d) memory; defaults to the center site.

    Usable far beyond the dense-table guard (the d=2 log-law fit needs
    N up to several hundred).
    """
    if site is None:
        site = (N // 2,) * d
    rel = np.asarray(site, dtype=np.int64)
    if ((rel <= 0) | (rel >= N)).any():
        raise ValueError("site must be interior")
    basis = spectral_basis(N)
    weights = [basis.vector(np.arange(1, N), k)[0] ** 2 if False else None for k in []]
    # per-axis squared eigenvector values at the site
    i = np.arange(1, N)
    w = [(np.sqrt(2.0 / N) * np.sin(i * rel[axis] * np.pi / N)) ** 2 for axis in range(d)]
    inv = 1.0 / _eig_sum_grid(d, N, m)
    out = inv
    for axis in range(d):
        out = np.tensordot(w[axis], out, axes=(0, 0))
    return float(out)


# ----------------------------------------------------------------------
# infinite-volume Green function
# ----------------------------------------------------------------------

def _bessel_product(t: np.ndarray, x: tuple[int, ...], m: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.exp(-m * m * t)
    for xi in x:
        out = out * ive(abs(int(xi)), 2.0 * t)
    return out


@lru_cache(maxsize=100_000)
def _green_infinite_cached(d: int, x: tuple[int, ...], m: float) -> float:
    if m == 0.0 and d <= 2:
        raise ValueError("massless infinite-volume field needs d >= 3")
    # Integrand ~ (4 pi t)^{-d/2} e^{-m^2 t}; choose a cutoff where the
    # remaining tail is below 1e-13 and integrate log-spaced panels.
    if m > 0.0:
        T = max(60.0 / (m * m), 10.0)
    else:
        c = (4.0 * np.pi) ** (-d / 2.0)
        T = max((c / ((d / 2.0 - 1.0) * 1e-13)) ** (1.0 / (d / 2.0 - 1.0)), 10.0)
    t_star = max(1.0, float(np.linalg.norm(x)))
    edges = [0.0, t_star]
    while edges[-1] < T:
        edges.append(min(edges[-1] * 4.0, T))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = scipy.integrate.quad(
            _bessel_product, a, b, args=(x, m), epsabs=1e-12, epsrel=1e-11, limit=200
        )
        total += val
    return float(total)


def green_infinite(d: int, x, m: float = 0.0) -> float:
    """Infinite-volume Green function G^m(0, x) (rate one per edge).

    Requires d >= 3 when m = 0; any dimension for m > 0.
    """
    x = tuple(int(v) for v in np.atleast_1d(np.asarray(x, dtype=np.int64)))
    if len(x) == 1 and d > 1:
        x = x * 0 + x  # no-op; explicit vectors expected
    if len(x) != d:
        raise ValueError(f"site has {len(x)} coordinates, expected {d}")
    key = tuple(sorted(abs(v) for v in x))
    return _green_infinite_cached(d, key, float(m))


def sigma_d_squared(d: int) -> float:
    """Variance of the massless infinite-volume field (d >= 3)."""
    return green_infinite(d, (0,) * d, 0.0)


def sigma_m_squared(m: float, d: int = 2) -> float:
    """Variance of the massive infinite-volume field."""
    if m <= 0:
        raise ValueError("mass must be positive")
    return green_infinite(d, (0,) * d, m)


def green_bound_constant(d: int, radius: int = 10, m: float = 0.0) -> float:
    """Fitted c_d with G(0,x) <= c_d / (1 + |x|^{d-2}) on |x| <= radius."""
    best = 0.0
    ax = range(0, radius + 1)
    for x in np.ndindex(*((radius + 1,) * d)):
        if np.linalg.norm(x) > radius:
            continue
        val = green_infinite(d, x, m) * (1.0 + np.linalg.norm(x) ** (d - 2))
        best = max(best, val)
    return best


# ----------------------------------------------------------------------
# Poisson kernel and harmonic extension
# ----------------------------------------------------------------------

def _interior_boundary_coupling(box: Box):
    """Sparse matrix B with B[i, j] = 1 iff interior site i ~ boundary site j."""
    interior = box.interior_sites
    boundary = box.boundary_sites
    b_index = {tuple(s): k for k, s in enumerate(boundary)}
    rows, cols = [], []
    for i, s in enumerate(interior):
        for axis in range(box.d):
            for step in (-1, 1):
                nb = s.copy()
                nb[axis] += step
                j = b_index.get(tuple(nb))
                if j is not None:
                    rows.append(i)
                    cols.append(j)
    data = np.ones(len(rows))
    return scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(len(interior), len(boundary))
    )


@lru_cache(maxsize=16)
def _coupling_cached(d: int, N: int):
    return _interior_boundary_coupling(Box(d=d, N=N))


def poisson_kernel(box: Box, x, m: float = 0.0) -> np.ndarray:
    """Hitting weights p(x, y) over ``box.boundary_sites`` for interior x.

    Solves (Delta - m^2) H = 0 with indicator boundary data; for m = 0 the
    weights are a probability vector, for m > 0 they sum to the chance of
    reaching the boundary before the exponential killing time.  If x lies
    on the boundary the kernel degenerates to a point mass at x.
    """
    rel = np.asarray(x, dtype=np.int64) - np.asarray(box.offset)
    if ((rel < 0) | (rel > box.N)).any():
        raise ValueError(f"site {x!r} outside box")
    boundary = box.boundary_sites
    if ((rel == 0) | (rel == box.N)).any():
        weights = np.zeros(len(boundary))
        match = (boundary == np.asarray(x)).all(axis=1)
        weights[match] = 1.0
        return weights
    lu = _interior_factor(box.d, box.N, float(m))
    B = _coupling_cached(box.d, box.N)
    e = np.zeros((box.N - 1) ** box.d)
    e[int(np.ravel_multi_index(tuple(rel - 1), (box.N - 1,) * box.d))] = 1.0
    z = lu.solve(e)  # A symmetric, so row of A^{-1}
    return B.T @ z


def harmonic_extension(box: Box, boundary_values, m: float = 0.0, recenter: float = 0.0) -> np.ndarray:
    """Mean field on the interior given boundary data (canonical order).

    Solves (Delta - m^2) H = 0, H = phi_hat on the boundary; with a
    recentring height u the massive mean is u + H_m[phi_hat - u].
    Returns the interior values in row-major order.
    """
    phi_hat = np.asarray(boundary_values, dtype=float)
    if phi_hat.shape != (len(box.boundary_sites),):
        raise ValueError(
            f"need {len(box.boundary_sites)} boundary values, got {phi_hat.shape}"
        )
    lu = _interior_factor(box.d, box.N, float(m))
    B = _coupling_cached(box.d, box.N)
    rhs = B @ (phi_hat - recenter)
    return recenter + lu.solve(rhs)


def harmonic_variance(box: Box, x, gamma: np.ndarray, m: float = 0.0) -> float:
    """Variance sum_{y,y'} p(x,y) p(x,y') Gamma(y,y') of the harmonic mean
    at x when the boundary field has covariance Gamma (PSD, boundary order)."""
    gamma = np.asarray(gamma, dtype=float)
    nb = len(box.boundary_sites)
    if gamma.shape != (nb, nb):
        raise ValueError(f"Gamma must be {nb}x{nb}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (gamma + gamma.T)).min())
    if min_eig < -1e-8:
        raise ValueError(f"Gamma not PSD (min eigenvalue {min_eig:.3e})")
    p = poisson_kernel(box, x, m)
    return float(p @ gamma @ p)


def boundary_green_matrix(box: Box, m: float = 0.0) -> np.ndarray:
    """Infinite-volume Green covariance restricted to the boundary sites."""
    boundary = box.boundary_sites
    n = len(boundary)
    out = np.empty((n, n))
    for i in range(n):
        diffs = boundary[i:] - boundary[i]
        for k, dx in enumerate(diffs):
            out[i, i + k] = out[i + k, i] = green_infinite(box.d, dx, m)
    return out


# ----------------------------------------------------------------------
# clustered Green sums
# ----------------------------------------------------------------------

def green_sum_sup(d: int, radius: int, kappa: int, m: float = 0.0, budget: int = 2 * 10**7):
    """Maximize sum_{(x,y) in B^2} G(x, y) over B in the window {-R..R}^d
    with |B| = kappa, by chunked brute force.

    Returns (value, maximizing site tuple).  The combination count is
    guarded by ``budget``.
    """
    import itertools as it
    from math import comb

    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    window = np.array(list(np.ndindex(*((2 * radius + 1,) * d)))) - radius
    nw = len(window)
    if comb(nw, kappa) > budget:
        raise ConfigError(
            f"C({nw},{kappa}) = {comb(nw, kappa)} exceeds brute-force budget {budget}"
        )
    pair = np.empty((nw, nw))
    for i in range(nw):
        for j in range(i, nw):
            pair[i, j] = pair[j, i] = green_infinite(d, window[i] - window[j], m)
    if kappa == 1:
        i = int(np.argmax(np.diag(pair)))
        return float(pair[i, i]), (tuple(window[i]),)
    best_val, best_set = -np.inf, None
    chunk = 500_000
    combos = it.combinations(range(nw), kappa)
    while True:
        block = np.fromiter(
            it.chain.from_iterable(it.islice(combos, chunk)), dtype=np.int64
        ).reshape(-1, kappa)
        if block.size == 0:
            break
        vals = np.zeros(len(block))
        for a in range(kappa):
            for b in range(kappa):
                vals += pair[block[:, a], block[:, b]]
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_set = tuple(tuple(window[i]) for i in block[k])
    return best_val, best_set


# ----------------------------------------------------------------------
# binary cache
# ----------------------------------------------------------------------

_CACHE_VERSION = 1
_MAGIC = b"GFFGRN01"


def save_green_table(table: GreenTable, path) -> None:
    """Little-endian cache: 8-byte magic, u32 header length, JSON header
    {d, N, m, version, n}, then n*n float64 ('<f8') matrix entries."""
    header = {
        "d": table.box.d,
        "N": table.box.N,
        "m": table.m,
        "version": _CACHE_VERSION,
        "n": table.matrix.shape[0],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(table.matrix, dtype="<f8").tobytes())


def load_green_table(path) -> GreenTable:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not a Green-table cache file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        if header.get("version") != _CACHE_VERSION:
            raise ValueError(f"unsupported cache version {header.get('version')}")
        n = header["n"]
        data = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
    box = Box(d=header["d"], N=header["N"])
    return GreenTable(box=box, m=header["m"], matrix=data.astype(float))


def gaussian_band_probability(mean: float, sd: float, lo: float = -1.0, hi: float = 1.0) -> float:
    """P(mean + sd*Normal in [lo, hi]), stable deep in the tails."""
    if sd <= 0:
        return float(lo <= mean <= hi)
    a = (lo - mean) / sd if np.isfinite(lo) else -np.inf
    b = (hi - mean) / sd if np.isfinite(hi) else np.inf
    if a > 0 or b < 0:  # both limits on one side: difference of same-size tails
        lo_t, hi_t = (a, b) if a > 0 else (-b, -a)
        return float(ndtr(-lo_t) - ndtr(-hi_t))
    return float(ndtr(b) - ndtr(a))


def contact_constant(d: int) -> float:
    """C_d = P(sigma_d * Normal in [-1, 1]), the pure-model slope floor."""
    return gaussian_band_probability(0.0, np.sqrt(sigma_d_squared(d)))
