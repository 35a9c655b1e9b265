"""Entanglement measures and structure fits for two-qubit states.

The protocol under study only ever produces X-shaped states: population on
the diagonal plus a single coherence between ``HV`` and ``VH``.  Those are
captured by :class:`XStateParams`, for which the concurrence has a closed
form.  The general Wootters computation is kept alongside it as an
independent cross-check route.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DensityOperator, EbrsimError, normalize, singlet_vector

_EPS = 1e-12

_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
_SPIN_FLIP = np.kron(_SIGMA_Y, _SIGMA_Y)


class NotTwoQubit(EbrsimError):
    """A two-qubit quantity was requested for an operator of other dimension."""


class NoThreshold(EbrsimError):
    """Concurrence does not cross zero on the scanned transmittivity grid."""


@dataclass(frozen=True)
class XStateParams:
    """Unnormalized X-state entries ``(alpha, beta, gamma, delta, xi)``.

    The represented operator is::

        (1 / 4P) * [[alpha, 0,      0,     0    ],
                    [0,     beta,  -i xi,  0    ],
                    [0,     i xi,   gamma, 0    ],
                    [0,     0,      0,     delta]]

    in the ``HH, HV, VH, VV`` basis, where the diagonal entries sum to
    ``4 P`` and ``P`` is the branch probability.  With this sign choice a
    transparent channel (``xi = -2 T^2`` at ``T = 1``) reproduces the
    source singlet ``(|HV> - i|VH>)/sqrt(2)`` exactly.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    xi: float
    P: float

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta"):
            if getattr(self, name) < -_EPS:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not (0.0 < self.P <= 1.0 + _EPS):
            raise ValueError(f"P must lie in (0, 1], got {self.P!r}")
        total = self.alpha + self.beta + self.gamma + self.delta
        if abs(total - 4.0 * self.P) > 4.0 * _EPS:
            raise ValueError(f"diagonal sum {total!r} does not match 4P = {4.0 * self.P!r}")
        bound = np.sqrt(max(self.beta, 0.0) * max(self.gamma, 0.0))
        if abs(self.xi) > bound + _EPS:
            raise ValueError(f"|xi| = {abs(self.xi)!r} exceeds sqrt(beta*gamma) = {bound!r}")

    @classmethod
    def from_operator(cls, rho: DensityOperator, tol: float = 1e-10) -> "XStateParams":
        """Extract parameters from a branch operator whose trace is ``P``.

        The stored entries are four times the operator's, so that they sum
        to ``4 P`` as the convention requires.  Raises ``ValueError`` if
        entries outside the X pattern exceed ``tol`` or if the coherence
        is not purely imaginary.
        """
        if rho.dim != 4:
            raise NotTwoQubit(f"expected dim 4, got {rho.dim}")
        m = rho.matrix
        mask = np.ones((4, 4), dtype=bool)
        for i, j in ((0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (2, 1)):
            mask[i, j] = False
        stray = float(np.max(np.abs(m[mask])))
        if stray > tol:
            raise ValueError(f"operator is not X-shaped: stray entry magnitude {stray!r}")
        if abs(m[1, 2].real) > tol:
            raise ValueError("HV-VH coherence is not purely imaginary")
        return cls(
            alpha=4.0 * float(m[0, 0].real),
            beta=4.0 * float(m[1, 1].real),
            gamma=4.0 * float(m[2, 2].real),
            delta=4.0 * float(m[3, 3].real),
            xi=4.0 * float((1.0j * m[1, 2]).real),
            P=float(np.trace(m).real),
        )


def assemble(params: XStateParams) -> np.ndarray:
    """Unnormalized X matrix with trace ``4 P``."""
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = params.alpha
    m[1, 1] = params.beta
    m[2, 2] = params.gamma
    m[3, 3] = params.delta
    m[1, 2] = -1.0j * params.xi
    m[2, 1] = 1.0j * params.xi
    return m


def normalized_state(params: XStateParams) -> DensityOperator:
    """Unit-trace state ``assemble(params) / 4P``."""
    return DensityOperator(assemble(params) / (4.0 * params.P), 1.0)


@dataclass(frozen=True)
class ConcurrenceResult:
    """Wootters concurrence plus the four sqrt-eigenvalues behind it."""

    value: float
    sqrt_eigenvalues: tuple[float, float, float, float]


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    herm = 0.5 * (matrix + matrix.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def concurrence(rho: DensityOperator) -> ConcurrenceResult:
    """Wootters concurrence of a two-qubit state.

    Computes the sqrt-eigenvalues of ``rho rho~`` (with the spin-flipped
    ``rho~``) through the Hermitian similarity ``sqrt(rho) rho~ sqrt(rho)``,
    which shares the spectrum but keeps the eigenproblem symmetric; tiny
    negative eigenvalues from round-off are clamped to zero.
    """
    if rho.dim != 4:
        raise NotTwoQubit(f"concurrence requires a two-qubit operator, got dim {rho.dim}")
    state, _ = normalize(rho)
    s = 0.5 * (state.matrix + state.matrix.conj().T)
    flipped = _SPIN_FLIP @ s.conj() @ _SPIN_FLIP
    root = _psd_sqrt(s)
    product = root @ flipped @ root
    vals = np.linalg.eigvalsh(0.5 * (product + product.conj().T))
    lams = np.sqrt(np.clip(vals, 0.0, None))[::-1]
    value = max(0.0, float(lams[0] - lams[1] - lams[2] - lams[3]))
    return ConcurrenceResult(value=value, sqrt_eigenvalues=tuple(float(x) for x in lams))


def concurrence_x(params: XStateParams) -> float:
    """Closed-form concurrence for X states: ``max(0, (|xi| - sqrt(alpha delta)) / 2P)``."""
    num = abs(params.xi) - np.sqrt(max(params.alpha, 0.0) * max(params.delta, 0.0))
    return max(0.0, float(num / (2.0 * params.P)))


def fidelity(a: DensityOperator, b: DensityOperator) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2`` of the normalized states."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sa, _ = normalize(a)
    sb, _ = normalize(b)
    root = _psd_sqrt(sa.matrix)
    inner = root @ sb.matrix @ root
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    total = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    return min(total * total, 1.0) if total * total > 1.0 - 1e-15 else total * total


def werner_decompose(rho: DensityOperator, tol: float = 1e-10) -> float | None:
    """Fit ``rho = q |psi-><psi-| + (1 - q) I/4``; return ``q`` or ``None``.

    ``q`` is read off the ``(HV, HV)`` diagonal entry and then verified
    against all sixteen entries.  Negative ``q`` (weight pushed onto the
    triplet sector) is allowed as long as the fit is exact.
    """
    if rho.dim != 4:
        raise NotTwoQubit(f"expected dim 4, got {rho.dim}")
    state, _ = normalize(rho)
    q = float(4.0 * state.matrix[1, 1].real - 1.0)
    psi = singlet_vector()
    model = q * np.outer(psi, psi.conj()) + (1.0 - q) * np.eye(4) / 4.0
    if float(np.max(np.abs(state.matrix - model))) > tol:
        return None
    return q


def crossing_threshold(
    value_of_t: Callable[[float], float],
    grid_step: float = 0.01,
    tol: float = 1e-9,
) -> float:
    """Largest ``T`` at which ``value_of_t`` is still zero before turning positive.

    Scans the open grid ``(0, 1)`` with ``grid_step``, brackets the last
    zero-to-positive transition, then bisects to ``|dT| <= tol``.
    """
    grid = [grid_step * k for k in range(1, int(round(1.0 / grid_step)))]
    values = [value_of_t(t) for t in grid]
    bracket = None
    for lo, hi, vlo, vhi in zip(grid, grid[1:], values, values[1:]):
        if vlo <= 0.0 < vhi:
            bracket = (lo, hi)
    if bracket is None:
        raise NoThreshold("concurrence has no zero-to-positive crossing on the grid")
    lo, hi = bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if value_of_t(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def breaking_threshold(scenario, stage: str = "I", grid_step: float = 0.01, tol: float = 1e-9) -> float:
    """Largest transmittivity at which the stage output is still separable.

    Intended for stage I, where the concurrence rises from exactly zero
    past a scenario-dependent transmittivity.  Raises :class:`NoThreshold`
    when no zero-to-positive crossing exists (for example stage II in the
    distinguishable scenario, which is entangled for every ``T``).
    """
    from . import protocol  # local import; protocol depends on this module

    if stage not in ("I", "II"):
        raise ValueError(f"stage must be 'I' or 'II', got {stage!r}")

    def c_of_t(t: float) -> float:
        out = protocol.stage1(scenario, t) if stage == "I" else protocol.stage2(scenario, t)
        return concurrence_x(out.params)

    return crossing_threshold(c_of_t, grid_step=grid_step, tol=tol)
