"""Bures-Wasserstein geometry of a Gibbs family.

The metric comes from symmetric logarithmic derivatives: with
L_i solving rho L_i + L_i rho = 2 d rho / d lam_i, the components are
g_ij = Re tr(rho L_i L_j).  State derivatives are Richardson-extrapolated
central differences of the family map; the distance is
d^2 = tr A + tr B - 2 tr[(A^{1/2} B A^{1/2})^{1/2}].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NearSingularError,
    NumericalConsistencyError,
    ValidationError,
)
from .gibbs import ObservableSet, gibbs_batch, gibbs_point
from .linalg import (
    SLD_DENOM_FLOOR,
    DensityOperator,
    HermitianOperator,
    hermitize,
    sld_solve,
)

__all__ = [
    "FDScheme",
    "MetricTensor",
    "fidelity",
    "bw_distance",
    "state_derivatives",
    "metric_tensor",
    "metric_grid",
]

# offsets (units of step) and weights (units of 1/step) for d/dx
_STENCILS = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    4: (
        np.array([-2.0, -1.0, 1.0, 2.0]),
        np.array([1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0]),
    ),
}


@dataclass(frozen=True)
class FDScheme:
    """Central-difference configuration for derivatives of the family map."""

    step: float = 1e-5
    order: int = 4

    def __post_init__(self) -> None:
        if not (1e-8 <= self.step <= 1e-2):
            raise ValidationError(f"step must be in [1e-8, 1e-2], got {self.step!r}")
        if self.order not in (2, 4):
            raise ValidationError(f"order must be 2 or 4, got {self.order!r}")


@dataclass(frozen=True)
class MetricTensor:
    """Symmetric PSD n x n metric at a base point lam."""

    lam: np.ndarray
    g: np.ndarray
    psd_atol: float = field(default=1e-10, repr=False)

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=float)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if g.shape != (lam.size, lam.size):
            raise ValidationError(f"metric shape {g.shape} does not match n={lam.size}")
        if not np.array_equal(g, g.T):
            raise ValidationError("metric must be exactly symmetric; symmetrize first")
        w_min = float(np.linalg.eigvalsh(g)[0])
        if w_min < -self.psd_atol:
            raise NumericalConsistencyError(
                f"metric has eigenvalue {w_min:.3e} below the PSD tolerance"
            )
        g = g.copy()
        g.flags.writeable = False
        lam = lam.copy()
        lam.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lam", lam)


def _clamped_psd_sqrt(matrix: np.ndarray, what: str) -> np.ndarray:
    """Square root of a PSD matrix, zeroing roundoff-negative eigenvalues."""
    w, u = np.linalg.eigh(hermitize(matrix))
    if float(w[0]) < -1e-10:
        raise NumericalConsistencyError(
            f"{what} has eigenvalue {w[0]:.3e}; not positive semidefinite"
        )
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """F = tr[(rho^{1/2} sigma rho^{1/2})^{1/2}], boundary states allowed."""
    if rho.dim != sigma.dim:
        raise ValidationError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    spec = rho.spectrum()
    sqrt_rho = (spec.eigenvectors * np.sqrt(spec.eigenvalues)) @ spec.eigenvectors.conj().T
    inner = sqrt_rho @ sigma.matrix @ sqrt_rho
    w = np.linalg.eigvalsh(hermitize(inner))
    if float(w[0]) < -1e-10:
        raise NumericalConsistencyError(
            f"fidelity kernel eigenvalue {w[0]:.3e}; inputs are not states"
        )
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def bw_distance(a: HermitianOperator, b: HermitianOperator) -> float:
    """Bures-Wasserstein distance between positive semidefinite matrices.

    d = sqrt(tr A + tr B - 2 tr[(A^{1/2} B A^{1/2})^{1/2}]); for unit
    traces this is sqrt(2 - 2 F).  Radicands in [-1e-12, 0] are clamped
    to zero; anything lower is a numerical-consistency failure.
    """
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    for name, op in (("A", a), ("B", b)):
        w_min = float(np.linalg.eigvalsh(op.matrix)[0])
        if w_min < -1e-12:
            raise ValidationError(
                f"{name} has eigenvalue {w_min:.3e}; inputs must be PSD"
            )
    sqrt_a = _clamped_psd_sqrt(a.matrix, "A")
    cross = _clamped_psd_sqrt(sqrt_a @ b.matrix @ sqrt_a, "A^1/2 B A^1/2")
    radicand = float(
        np.trace(a.matrix).real + np.trace(b.matrix).real - 2.0 * np.trace(cross).real
    )
    if radicand < -1e-12:
        raise NumericalConsistencyError(
            f"negative squared distance {radicand:.3e} beyond the clamp window"
        )
    return float(np.sqrt(max(radicand, 0.0)))


def _stencil_points(lams: np.ndarray, n: int, scheme: FDScheme) -> np.ndarray:
    """All shifted parameter points, shape (P, n, n_off, n)."""
    offsets, _ = _STENCILS[scheme.order]
    pts = lams[:, None, None, :] + (
        scheme.step * offsets[None, None, :, None] * np.eye(n)[None, :, None, :]
    )
    return pts


def _batched_state_derivatives(
    obs: ObservableSet, lams: np.ndarray, scheme: FDScheme
) -> np.ndarray:
    """d rho / d lam_i for every point, shape (P, n, m, m)."""
    n = obs.n
    offsets, weights = _STENCILS[scheme.order]
    pts = _stencil_points(lams, n, scheme)
    flat = pts.reshape(-1, n)
    rho = gibbs_batch(obs, flat).rho.reshape(
        lams.shape[0], n, offsets.size, obs.dim, obs.dim
    )
    drho = np.einsum("o,piokl->pikl", weights / scheme.step, rho)
    return (drho + drho.conj().swapaxes(2, 3)) / 2


def state_derivatives(
    obs: ObservableSet, lam, scheme: FDScheme = FDScheme()
) -> list[HermitianOperator]:
    """Partial derivatives of the family map, one per parameter direction.

    Each derivative is self-adjoint and traceless (the trace of rho is
    constant along the family).
    """
    lam = np.asarray(lam, dtype=float).reshape(1, -1)
    drho = _batched_state_derivatives(obs, lam, scheme)[0]
    return [HermitianOperator(drho[i]) for i in range(obs.n)]


def metric_tensor(obs: ObservableSet, lam, scheme: FDScheme = FDScheme()) -> MetricTensor:
    """Metric components g_ij = Re tr(rho L_i L_j) from SLD solves at lam."""
    point = gibbs_point(obs, lam)
    ders = state_derivatives(obs, lam, scheme)
    slds = [sld_solve(point.rho, d) for d in ders]
    n = obs.n
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            val = np.trace(point.rho.matrix @ slds[i].matrix @ slds[j].matrix).real
            g[i, j] = g[j, i] = float(val)
    return MetricTensor(point.lam, (g + g.T) / 2)


def metric_grid(obs: ObservableSet, lams, scheme: FDScheme = FDScheme()) -> np.ndarray:
    """Metric at a (P, n) block of points, returned as a (P, n, n) array.

    Same Lyapunov construction as `metric_tensor`, vectorized over the
    block with a single stacked eigendecomposition per stencil; grids and
    paths are embarrassingly parallel and this is the fan-out surface.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    if lams.shape[0] == 0:
        return np.empty((0, obs.n, obs.n))
    centers = gibbs_batch(obs, lams)
    drho = _batched_state_derivatives(obs, lams, scheme)
    u = centers.U
    p = centers.p
    denom = p[:, :, None] + p[:, None, :]
    worst = float(denom.min())
    if worst < SLD_DENOM_FLOOR:
        idx = int(np.unravel_index(np.argmin(denom), denom.shape)[0])
        raise NearSingularError(
            f"eigenvalue sum {worst:.3e} below {SLD_DENOM_FLOOR:.0e} at "
            f"lambda = {lams[idx].tolist()}; too close to the boundary"
        )
    d_tilde = np.einsum("pba,pibc,pcd->piad", u.conj(), drho, u)
    l_tilde = 2.0 * d_tilde / denom[:, None, :, :]
    g = np.einsum("pa,piab,pjba->pij", p, l_tilde, l_tilde).real
    return (g + g.swapaxes(1, 2)) / 2
