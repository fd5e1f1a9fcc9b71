"""Nystrom discretisation of L_V(lambda), Pi_V and K_V(lambda).

Uniform cell-centred grid on [-L_rho, L_rho]^2. Off-diagonal entries sample
the kernel at node pairs; the diagonal cell carries the exact integral of
-(1/2pi) ln|x - y| over the cell plus F(0) h^2. On a uniform grid the
kernel depends only on the integer node offset, so every operator is built
from an n x n offset table.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .potential import PotentialSpec, check_eps, evaluate_V, evaluate_rho
from .specfun import TWO_PI, kernel_F, kernel_H0, log_cell_integral

N_MIN = 16
N_MAX = 160
MAX_MATRIX_BYTES = 2 * 1024**3

TAG_L_V = "L_V"
TAG_PI_V = "Pi_V"
TAG_K_V = "K_V"
TAG_L_RHO = "L_rho"
TAGS = (TAG_L_V, TAG_PI_V, TAG_K_V, TAG_L_RHO)


class GridResolutionError(ValueError):
    """Grid spacing cannot resolve the potential oscillation."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    half_width: float
    n_per_side: int

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n_per_side

    @property
    def size(self) -> int:
        return self.n_per_side**2

    @property
    def centers(self) -> np.ndarray:
        return -self.half_width + self.h * (np.arange(self.n_per_side) + 0.5)

    @property
    def nodes(self) -> np.ndarray:
        """(n^2, 2) cell centres, row-major in (x1, x2)."""
        c = self.centers
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.h * self.h)

    @property
    def log_moment(self) -> float:
        return log_cell_integral(self.h)

    def offset_distances(self) -> np.ndarray:
        a = np.arange(self.n_per_side)
        return self.h * np.hypot(a[:, None], a[None, :])


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: np.ndarray
    tag: str
    lam: float | None
    grid: QuadratureGrid


def required_n(spec: PotentialSpec, eps: float) -> int:
    h_max = 2.0 * math.pi * eps / (8.0 * spec.max_k)
    return int(math.ceil(2.0 * spec.cutoff_radius / h_max))


def build_grid(spec: PotentialSpec, eps: float, n_per_side: int) -> QuadratureGrid:
    eps = check_eps(eps)
    n = int(n_per_side)
    if not N_MIN <= n <= N_MAX:
        raise GridResolutionError(f"n_per_side must lie in [{N_MIN}, {N_MAX}], got {n}")
    grid = QuadratureGrid(spec.cutoff_radius, n)
    h_max = 2.0 * math.pi * eps / (8.0 * spec.max_k)
    if grid.h > h_max * (1 + 1e-12):
        raise GridResolutionError(
            f"grid spacing {grid.h:.4g} exceeds {h_max:.4g} for eps={eps}; "
            f"need n_per_side >= {required_n(spec, eps)}"
        )
    return grid


def kernel_table(lam: float, grid: QuadratureGrid) -> np.ndarray:
    """H0(lambda, .) on node offsets; entry [0, 0] is the corrected cell average."""
    d = grid.offset_distances()
    d[0, 0] = 1.0
    table = kernel_H0(lam, d)
    h2 = grid.h**2
    table[0, 0] = (-grid.log_moment / TWO_PI + kernel_F(0.0) * h2) / h2
    return table


def toeplitz_expand(table: np.ndarray, rows=None, cols=None) -> np.ndarray:
    """Dense block-Toeplitz matrix M[(i1,i2),(j1,j2)] = table[|i1-j1|, |i2-j2|].

    ``rows``/``cols`` optionally select node subsets (flat indices).
    """
    n = table.shape[0]
    if rows is None and cols is None:
        a = np.arange(n)
        da = np.abs(a[:, None] - a[None, :])
        full = table[da[:, :, None, None], da[None, None, :, :]]
        return full.transpose(0, 2, 1, 3).reshape(n * n, n * n)
    rows = np.arange(n * n) if rows is None else np.asarray(rows)
    cols = np.arange(n * n) if cols is None else np.asarray(cols)
    r1, r2 = np.divmod(rows, n)
    c1, c2 = np.divmod(cols, n)
    return table[np.abs(r1[:, None] - c1[None, :]), np.abs(r2[:, None] - c2[None, :])]


def _check_memory(grid: QuadratureGrid):
    nbytes = 8 * grid.size**2
    if nbytes > MAX_MATRIX_BYTES:
        raise MemoryError(
            f"dense {grid.size}x{grid.size} operator needs {nbytes / 2**30:.1f} GiB; use a coarser grid"
        )


def node_values(spec: PotentialSpec, eps: float, grid: QuadratureGrid):
    """(rho, V) sampled at the grid nodes."""
    nodes = grid.nodes
    return evaluate_rho(spec, nodes), evaluate_V(spec, eps, nodes)


def assemble_L_V(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid) -> DiscreteOperator:
    """A_ij = rho(x_i) H0(lambda, |x_i - x_j|) V(x_j) w_j with the corrected diagonal."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    _check_memory(grid)
    rho, v = node_values(spec, eps, grid)
    mat = toeplitz_expand(kernel_table(lam, grid))
    mat *= rho[:, None]
    mat *= (v * grid.weights)[None, :]
    return DiscreteOperator(mat, TAG_L_V, float(lam), grid)


def assemble_L_rho(spec: PotentialSpec, lam: float, grid: QuadratureGrid) -> DiscreteOperator:
    """rho H0(lambda) rho, the potential-free operator controlling modulus of continuity."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    _check_memory(grid)
    rho = evaluate_rho(spec, grid.nodes)
    mat = toeplitz_expand(kernel_table(lam, grid))
    mat *= rho[:, None]
    mat *= (rho * grid.weights)[None, :]
    return DiscreteOperator(mat, TAG_L_RHO, float(lam), grid)


def assemble_Pi_V(spec: PotentialSpec, eps: float, grid: QuadratureGrid) -> DiscreteOperator:
    """Rank-one B_ij = -(1/2pi) rho(x_i) V(x_j) w_j."""
    _check_memory(grid)
    rho, v = node_values(spec, eps, grid)
    mat = np.outer(rho, -(v * grid.weights) / TWO_PI)
    return DiscreteOperator(mat, TAG_PI_V, None, grid)


def assemble_K_V(spec: PotentialSpec, eps: float, lam: float, grid: QuadratureGrid) -> DiscreteOperator:
    """K_V(lambda) = Pi_V ln(lambda) + L_V(lambda)."""
    if not lam > 0:
        raise ValueError("K_V needs lambda > 0")
    L = assemble_L_V(spec, eps, lam, grid).matrix
    L += math.log(lam) * assemble_Pi_V(spec, eps, grid).matrix
    return DiscreteOperator(L, TAG_K_V, float(lam), grid)


def operator_norm(op, rtol: float = 1e-6, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A.

    ``op`` may be a DiscreteOperator, an array, or a tuple (matvec, rmatvec, n)
    for matrix-free use. The stopping rule extrapolates the geometric
    convergence of the Rayleigh quotient.
    """
    if isinstance(op, DiscreteOperator):
        op = op.matrix
    if isinstance(op, tuple):
        matvec, rmatvec, n = op
    else:
        A = np.asarray(op)
        matvec, rmatvec, n = A.dot, A.T.dot, A.shape[1]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    prev = None
    prev_delta = None
    for it in range(max_iter):
        y = matvec(x)
        s2 = float(np.dot(y, y))
        if s2 == 0.0:
            return 0.0
        z = rmatvec(y)
        x = z / np.linalg.norm(z)
        if prev is not None:
            delta = abs(s2 - prev)
            if delta <= 1e-15 * s2:
                return math.sqrt(s2)
            if prev_delta and it >= 3:
                q = delta / prev_delta
                if q < 1.0 and delta * q / (1.0 - q) <= 0.1 * rtol * s2:
                    return math.sqrt(s2)
            prev_delta = delta
        prev = s2
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def dump_matrix(path, matrix: np.ndarray) -> None:
    """Row-major little-endian float64 with an 8-byte (uint64) dimension header."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("only square matrices are dumped")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", m.shape[0]))
        fh.write(m.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError(f"matrix file holds {data.size} values, header says {n}x{n}")
    return data.reshape(n, n).copy()


def active_nodes(v: np.ndarray) -> np.ndarray:
    """Indices of nodes where V is nonzero; the trace functional only sees these."""
    return np.flatnonzero(v != 0.0)

