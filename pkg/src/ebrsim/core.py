"""Density-operator algebra for small optical Hilbert spaces.

Operators are plain complex128 numpy matrices carried together with a
``trace_weight``, the trace the matrix is supposed to have.  Keeping
unnormalized operators first-class lets post-selection and filtering
probabilities compose by plain multiplication: every pipeline stage can
hand back both a conditional state and the weight of the branch that
produced it.

Basis convention for two polarization qubits: ``HH, HV, VH, VV``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

TWO_QUBIT_BASIS = ("HH", "HV", "VH", "VV")

TOL_HERMITIAN = 1e-12
TOL_POSITIVITY = 1e-10
TOL_TRACE = 1e-12

# Refuse tensor products beyond this dimension; guards runaway growth
# when composing subsystems.
MAX_DIM = 4096

# Branch weights at or below this floor count as impossible branches.
ZERO_TRACE_FLOOR = 1e-300


class EbrsimError(Exception):
    """Base class for domain errors raised by this package."""


class ZeroTrace(EbrsimError):
    """Normalization was requested for an operator with (near-)zero trace."""


def _as_complex_matrix(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix contains non-finite entries")
    return m


@dataclass(frozen=True)
class DensityOperator:
    """A (possibly unnormalized) Hermitian operator plus its claimed trace.

    ``trace_weight`` is the probability weight of the branch the operator
    describes.  A normalized state has ``trace_weight == 1``.  The
    constructor does not reject unphysical matrices; use :func:`validate`
    to obtain a diagnostics report.
    """

    matrix: np.ndarray
    trace_weight: float

    def __init__(self, matrix, trace_weight: float | None = None):
        m = _as_complex_matrix(matrix)
        if trace_weight is None:
            trace_weight = float(np.trace(m).real)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace_weight", float(trace_weight))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, vector, weight: float = 1.0) -> "DensityOperator":
        """Rank-one operator ``weight * |v><v|`` from a normalized ket."""
        v = np.asarray(vector, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return cls(weight * np.outer(v, v.conj()), trace_weight=weight)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Numerical health check of a :class:`DensityOperator`."""

    hermiticity_residual: float
    min_eigenvalue: float
    trace_deviation: float
    hermitian: bool
    positive: bool
    trace_consistent: bool

    @property
    def ok(self) -> bool:
        return self.hermitian and self.positive and self.trace_consistent


def validate(rho: DensityOperator) -> DiagnosticsReport:
    """Report hermiticity, positivity and trace consistency.

    Never raises: callers decide what to do with a failed check.
    Positivity is judged on the Hermitian part, with eigenvalues allowed
    to dip to ``-TOL_POSITIVITY`` to absorb round-off.
    """
    m = rho.matrix
    herm_residual = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    herm_part = 0.5 * (m + m.conj().T)
    min_eig = float(np.min(np.linalg.eigvalsh(herm_part))) if m.size else 0.0
    trace_dev = float(abs(np.trace(m) - rho.trace_weight))
    return DiagnosticsReport(
        hermiticity_residual=herm_residual,
        min_eigenvalue=min_eig,
        trace_deviation=trace_dev,
        hermitian=herm_residual <= TOL_HERMITIAN,
        positive=min_eig >= -TOL_POSITIVITY,
        trace_consistent=trace_dev <= TOL_TRACE,
    )


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    """Kronecker product; trace weights multiply."""
    new_dim = a.dim * b.dim
    if new_dim > MAX_DIM:
        raise ValueError(f"tensor product dimension {new_dim} exceeds MAX_DIM={MAX_DIM}")
    return DensityOperator(np.kron(a.matrix, b.matrix), a.trace_weight * b.trace_weight)


def partial_trace(
    rho: DensityOperator, keep: int, dims: tuple[int, int] | None = None
) -> DensityOperator:
    """Trace out one side of a bipartite operator.

    Parameters
    ----------
    keep : 0 to keep the first factor, 1 to keep the second.
    dims : subsystem dimensions ``(d_first, d_second)``.  Defaults to the
        square split, which covers the two-qubit case.
    """
    if keep not in (0, 1):
        raise ValueError("keep must be 0 or 1")
    if dims is None:
        side = int(round(rho.dim**0.5))
        if side * side != rho.dim:
            raise ValueError("dims required: operator dimension is not a perfect square")
        dims = (side, side)
    da, db = dims
    if da * db != rho.dim:
        raise ValueError(f"dims {dims} do not factor dimension {rho.dim}")
    r = rho.matrix.reshape(da, db, da, db)
    reduced = np.trace(r, axis1=1, axis2=3) if keep == 0 else np.trace(r, axis1=0, axis2=2)
    return DensityOperator(reduced, rho.trace_weight)


def apply_local(rho: DensityOperator, k_a: np.ndarray, k_b: np.ndarray) -> DensityOperator:
    """Apply a product operator ``(K_A (x) K_B) rho (K_A (x) K_B)^dag``.

    The result is left unnormalized; its trace weight is the branch
    weight after the (generally trace-decreasing) local operation.
    """
    ka = _as_complex_matrix(k_a)
    kb = _as_complex_matrix(k_b)
    if ka.shape[0] * kb.shape[0] != rho.dim:
        raise ValueError(
            f"local operators of dims {ka.shape[0]}x{kb.shape[0]} do not match dim {rho.dim}"
        )
    k = np.kron(ka, kb)
    out = k @ rho.matrix @ k.conj().T
    return DensityOperator(out, float(np.trace(out).real))


def normalize(rho: DensityOperator) -> tuple[DensityOperator, float]:
    """Rescale to unit trace; return ``(state, probability)``.

    The probability is the incoming ``trace_weight``.  Raises
    :class:`ZeroTrace` when the branch weight has collapsed to zero.
    """
    weight = float(np.trace(rho.matrix).real)
    if weight <= ZERO_TRACE_FLOOR:
        raise ZeroTrace(f"cannot normalize operator with trace {weight!r}")
    return DensityOperator(rho.matrix / weight, 1.0), weight


def singlet_vector() -> np.ndarray:
    """Polarization singlet ``(|HV> - i|VH>)/sqrt(2)`` produced by the source."""
    return np.array([0.0, 1.0, -1.0j, 0.0], dtype=np.complex128) / np.sqrt(2.0)


def maximally_mixed(dim: int = 4) -> DensityOperator:
    """Unpolarized state ``I/dim``."""
    return DensityOperator(np.eye(dim, dtype=np.complex128) / dim, 1.0)


def to_json(rho: DensityOperator, indent: int | None = None) -> str:
    """Serialize with ``[re, im]`` entry pairs; round-trips bit exactly.

    Python's JSON float formatting is shortest-roundtrip decimal, so
    :func:`from_json` recovers the identical binary matrix.
    """
    obj: dict = {"dim": rho.dim}
    if rho.dim == 4:
        obj["basis"] = list(TWO_QUBIT_BASIS)
    obj["trace_weight"] = rho.trace_weight
    obj["matrix"] = [
        [[float(z.real), float(z.imag)] for z in row] for row in rho.matrix
    ]
    return json.dumps(obj, indent=indent)


def from_json(text: str) -> DensityOperator:
    obj = json.loads(text)
    dim = int(obj["dim"])
    rows = obj["matrix"]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ValueError("matrix shape does not match declared dim")
    m = np.array(
        [[complex(entry[0], entry[1]) for entry in row] for row in rows],
        dtype=np.complex128,
    )
    return DensityOperator(m, float(obj["trace_weight"]))
