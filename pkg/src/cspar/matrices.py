"""Ternary measurement matrices and their diagnostics.

Matrices here are chip configuration: every entry is a weight in
{-1, 0, +1} applied by the analog front end, so constructors validate
the ternary domain and refuse all-zero rows.  The JSON file format is
deliberately plain (``{"n":..,"m":..,"entries":[[...],...]}``) so a
reviewer can audit the exact bits a run used.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .wavelets import SparseBasis  # re-export: the sparsifying side of the model

__all__ = [
    "MeasurementMatrix", "IsometryStats", "random_ternary", "identity_schedule",
    "pca_ternary", "block_diagonal", "empirical_rip", "l1_exposure_margins",
    "identifiable_random_ternary", "save_matrix", "load_matrix",
    "SparseBasis",
]


@dataclass(frozen=True)
class MeasurementMatrix:
    """N x M ternary weight matrix (rows = measurements, cols = channels)."""

    entries: np.ndarray
    n_rows: int = field(init=False)
    m_cols: int = field(init=False)

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise ValueError(f"entries must be 2-D, got shape {e.shape}")
        if not np.isin(e, (-1, 0, 1)).all():
            bad = np.unique(e[~np.isin(e, (-1, 0, 1))])
            raise ValueError(f"entries outside ternary domain: {bad.tolist()}")
        e = e.astype(np.int8)
        if e.shape[0] > e.shape[1]:
            raise ValueError(f"more rows than columns ({e.shape[0]} > {e.shape[1]}): not a compression")
        zero_rows = np.flatnonzero(~e.any(axis=1))
        if zero_rows.size:
            raise ValueError(f"all-zero row(s) {zero_rows.tolist()} measure nothing")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "n_rows", int(e.shape[0]))
        object.__setattr__(self, "m_cols", int(e.shape[1]))

    @property
    def matrix_id(self) -> str:
        """Stable content hash used to pair compressed blocks with their matrix."""
        h = hashlib.sha256()
        h.update(f"{self.n_rows}x{self.m_cols}:".encode())
        h.update(self.entries.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class IsometryStats:
    """Monte-Carlo restricted-isometry summary over random sparse unit vectors."""

    min_ratio: float
    max_ratio: float
    delta: float
    sparsity: int
    trials: int


def random_ternary(n: int, m: int, zero_fraction: float, seed: int) -> MeasurementMatrix:
    """I.i.d. ternary matrix: 0 with probability zero_fraction, else +-1 equiprobable.

    All-zero rows are rejected and redrawn so the result is always a
    valid measurement.  Deterministic for a given seed.
    """
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= n <= m, got n={n} m={m}")
    if not (0.0 <= zero_fraction < 1.0):
        raise ValueError(f"zero_fraction must be in [0, 1), got {zero_fraction}")
    rng = np.random.default_rng(seed)
    p = [(1.0 - zero_fraction) / 2.0, zero_fraction, (1.0 - zero_fraction) / 2.0]
    rows = []
    while len(rows) < n:
        row = rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=m, p=p)
        if row.any():
            rows.append(row)
    return MeasurementMatrix(np.stack(rows))


def identity_schedule(m: int, n_rows: int = 4) -> list[MeasurementMatrix]:
    """Uncompressed-capture schedule: one-hot rows cycling across all m channels.

    Returns ceil(m / n_rows) matrices whose rows, stacked in order, form
    the m x m identity.  Compressing with the schedule and concatenating
    the outputs recovers the raw data (up to ADC quantization and the
    fixed MAC scale).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n_rows < 1:
        raise ValueError(f"n_rows must be >= 1, got {n_rows}")
    eye = np.eye(m, dtype=np.int8)
    out = []
    for start in range(0, m, n_rows):
        out.append(MeasurementMatrix(eye[start:start + n_rows]))
    return out


def pca_ternary(calibration, n: int, deadzone: float = 0.25) -> MeasurementMatrix:
    """Ternarized principal directions of a calibration capture.

    ``calibration`` is an M x T block (or an object exposing ``.data``):
    M channels over T time samples.  The channel covariance is
    eigendecomposed, the top-n eigenvectors are sign-quantized, and
    components smaller than ``deadzone`` times the vector's peak
    magnitude are zeroed.  Each eigenvector's largest-magnitude
    component is forced positive first, removing the sign ambiguity.
    Re-orthogonality of the ternarized rows is not guaranteed.
    """
    data = np.asarray(getattr(calibration, "data", calibration), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"calibration must be 2-D (channels x time), got shape {data.shape}")
    m, t = data.shape
    if t < m:
        raise ValueError(f"need at least as many time samples as channels ({t} < {m})")
    if not (0.0 <= deadzone < 1.0):
        raise ValueError(f"deadzone must be in [0, 1), got {deadzone}")
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= n <= {m}, got n={n}")
    centered = data - data.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / max(t - 1, 1)
    rank = int(np.linalg.matrix_rank(cov))
    if rank < n:
        raise ValueError(f"calibration covariance has rank {rank} < requested {n} components")
    evals, evecs = np.linalg.eigh(cov)          # ascending order
    rows = np.zeros((n, m), dtype=np.int8)
    for i in range(n):
        v = evecs[:, -(i + 1)]
        peak = int(np.argmax(np.abs(v)))
        if v[peak] < 0:
            v = -v
        keep = np.abs(v) >= deadzone * np.abs(v[peak])
        rows[i] = np.where(keep, np.sign(v), 0.0).astype(np.int8)
    return MeasurementMatrix(rows)


def block_diagonal(blocks) -> MeasurementMatrix:
    """Tile matrices along the diagonal; models a scanned (moved) receiver."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    n_tot = sum(b.n_rows for b in blocks)
    m_tot = sum(b.m_cols for b in blocks)
    out = np.zeros((n_tot, m_tot), dtype=np.int8)
    r = c = 0
    for b in blocks:
        out[r:r + b.n_rows, c:c + b.m_cols] = b.entries
        r += b.n_rows
        c += b.m_cols
    return MeasurementMatrix(out)


def empirical_rip(phi: MeasurementMatrix, sparsity: int, trials: int, seed: int) -> IsometryStats:
    """Monte-Carlo isometry check on random sparse unit vectors.

    Columns are normalized by the average nonzero count per column so
    the reported delta is comparable across sparsity settings of the
    matrix itself.  delta = max |  ||phi_n x||^2 - 1 | over trials.
    """
    if not (1 <= sparsity <= phi.m_cols):
        raise ValueError(f"sparsity must be in [1, {phi.m_cols}], got {sparsity}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    scale = np.count_nonzero(phi.entries) / phi.m_cols
    phi_n = phi.entries.astype(np.float64) / np.sqrt(scale)
    rng = np.random.default_rng(seed)
    lo, hi = np.inf, -np.inf
    for _ in range(trials):
        support = rng.choice(phi.m_cols, size=sparsity, replace=False)
        x = np.zeros(phi.m_cols)
        x[support] = rng.standard_normal(sparsity)
        x /= np.linalg.norm(x)
        r = float(np.sum((phi_n @ x) ** 2))
        lo = min(lo, r)
        hi = max(hi, r)
    return IsometryStats(min_ratio=lo, max_ratio=hi,
                         delta=max(abs(lo - 1.0), abs(hi - 1.0)),
                         sparsity=sparsity, trials=trials)


def _exposure_margins_array(pf: np.ndarray) -> np.ndarray:
    """LP margin per column of a float matrix; see l1_exposure_margins."""
    from scipy.optimize import linprog

    n, m_cols = pf.shape
    out = np.empty(m_cols)
    for i in range(m_cols):
        # variables (nu_1..nu_n, m); maximize m
        cost = np.zeros(n + 1)
        cost[-1] = -1.0
        a_eq = np.zeros((1, n + 1))
        a_eq[0, :n] = pf[:, i]
        others = np.delete(pf, i, axis=1).T            # (m-1) x n
        a_ub = np.zeros((2 * others.shape[0], n + 1))
        a_ub[0::2, :n] = others
        a_ub[1::2, :n] = -others
        a_ub[:, -1] = 1.0
        res = linprog(cost, A_ub=a_ub, b_ub=np.ones(a_ub.shape[0]),
                      A_eq=a_eq, b_eq=[1.0],
                      bounds=[(None, None)] * n + [(None, 1.0)],
                      method="highs")
        out[i] = res.x[-1] if res.status == 0 else -np.inf
    return out


def l1_exposure_margins(phi: MeasurementMatrix) -> np.ndarray:
    """Per-channel margin certifying unique 1-sparse recovery.

    For channel i the margin is the largest m such that some dual vector
    nu has <col_i, nu> = 1 while |<col_j, nu>| <= 1 - m for every other
    column j.  Margin > 0 means a signal supported on channel i alone is
    the strictly unique minimum-l1 explanation of its own measurements.
    Margin 0 means the l1 problem is tied (for example a duplicated
    column, or col_i equal to the average of two others) and no solver
    can attribute the signal to the right channel; -inf marks a channel
    the matrix never senses (all-zero column).
    """
    return _exposure_margins_array(phi.entries.astype(np.float64))


def _canon_sign(c: np.ndarray) -> tuple:
    """Column pattern key, normalized so the first nonzero is positive."""
    nz = np.flatnonzero(c)
    return tuple(c if c[nz[0]] > 0 else -c)


def identifiable_random_ternary(n: int, m: int, zero_fraction: float, seed: int,
                                max_draws: int = 20000) -> MeasurementMatrix:
    """Random ternary matrix conditioned on per-channel identifiability.

    Columns are drawn i.i.d. from the same distribution as
    ``random_ternary`` and accepted one at a time while the growing
    matrix stays free of l1 ties.  At heavy compression (small n) the
    ternary alphabet is so coarse that unconditioned draws almost surely
    contain tied columns, which make single-channel signals
    unrecoverable by any method; this constructor samples the same
    family restricted to matrices where recovery is well posed.

    The accept rule skips columns with fewer than n-1 active channels
    (they tie with averages of denser columns), sign-duplicates, and
    pairs of full columns straddling an accepted (n-1)-active column;
    those are exactly the two-column tie patterns.  The finished matrix
    is certified by ``l1_exposure_margins`` and resampled in the rare
    case a higher-order tie slips through.  Deterministic per seed.
    """
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= n <= m, got n={n} m={m}")
    if not (0.0 <= zero_fraction < 1.0):
        raise ValueError(f"zero_fraction must be in [0, 1), got {zero_fraction}")
    rng = np.random.default_rng([seed, 401])
    p = [(1.0 - zero_fraction) / 2.0, zero_fraction, (1.0 - zero_fraction) / 2.0]
    cols: list[np.ndarray] = []
    seen: set = set()

    def completes_tie(c: np.ndarray) -> bool:
        nnz = int(np.count_nonzero(c))
        if nnz == n - 1:
            k = int(np.flatnonzero(c == 0)[0])
            hi, lo = c.copy(), c.copy()
            hi[k], lo[k] = 1, -1
            return _canon_sign(hi) in seen and _canon_sign(lo) in seen
        if nnz == n:
            for k in range(n):
                mid = c.copy()
                mid[k] = 0
                flip = c.copy()
                flip[k] = -flip[k]
                if _canon_sign(mid) in seen and _canon_sign(flip) in seen:
                    return True
        return False

    stalled = 0
    for _ in range(max_draws):
        c = rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=n, p=p)
        if np.count_nonzero(c) < max(n - 1, 1):
            continue
        key = _canon_sign(c)
        if key in seen or completes_tie(c):
            # a greedy prefix can block every remaining class; start over
            stalled += 1
            if stalled > 500:
                cols.clear()
                seen.clear()
                stalled = 0
            continue
        stalled = 0
        cols.append(c)
        seen.add(key)
        if len(cols) == m:
            phi = MeasurementMatrix(np.column_stack(cols))
            if np.all(l1_exposure_margins(phi) > 1e-9):
                return phi
            cols.clear()
            seen.clear()
    raise ValueError(f"no identifiable {n}x{m} matrix within {max_draws} draws "
                     f"for seed {seed}; try another seed")


def save_matrix(path, phi: MeasurementMatrix) -> None:
    doc = {"n": phi.n_rows, "m": phi.m_cols, "entries": phi.entries.tolist()}
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_matrix(path) -> MeasurementMatrix:
    with open(path) as f:
        doc = json.load(f)
    for key in ("n", "m", "entries"):
        if key not in doc:
            raise ValueError(f"matrix file {path} missing key {key!r}")
    e = np.asarray(doc["entries"])
    if e.ndim != 2 or e.shape != (doc["n"], doc["m"]):
        raise ValueError(f"matrix file {path}: entries shape {e.shape} "
                         f"does not match n={doc['n']} m={doc['m']}")
    return MeasurementMatrix(e)
