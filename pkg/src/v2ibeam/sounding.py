"""Uplink combiner design and sounding observation synthesis.

The sounding sample is r = z^H h(psi) + n with a unit-norm combiner z and
n ~ CN(0, 1/rho). The adaptive combiner maximizes the generalized Rayleigh
quotient

    z^H (D Q^2 D^H) z / z^H (D Q D^H + I/rho) z,

where D is the complex channel Jacobian at the predicted state. A hybrid
(analog/digital) reconstruction projects it onto N equal-gain steering atoms
via orthogonal matching pursuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_channel import ChannelRealization, array_response

POWER_ITERS = 200
POWER_TOL = 1e-10
DEGENERATE_NORM = 1e-30


@dataclass(frozen=True)
class Combiner:
    """Unit-norm combiner vector. For hybrid kind, z = analog @ digital with
    analog columns of per-entry modulus 1/sqrt(M)."""

    z: np.ndarray
    kind: str  # optimal | hybrid | dft_manifold
    fallback: bool = False
    analog: np.ndarray | None = None
    digital: np.ndarray | None = None
    correlation: float | None = None


@dataclass(frozen=True)
class RealSounding:
    """Real-domain lifting of one sounding sample.

    r_lift = [Re r, Im r]; z_lift is the 2 x 2M block matrix built from the
    combiner row z^H so that z_lift @ h_lift = [Re(z^H h), Im(z^H h)].
    noise_var is the per-component real noise variance 1/(2 rho).
    """

    r_lift: np.ndarray
    z_lift: np.ndarray
    noise_var: float


@dataclass(frozen=True)
class SteeringDictionary:
    """Unit-norm steering atoms d_M(psi_g)/sqrt(M) on a uniform psi grid."""

    atoms: np.ndarray  # M x (oversampling * M)
    grid: np.ndarray
    oversampling: int = 4

    @staticmethod
    def build(num_antennas: int, oversampling: int = 4) -> "SteeringDictionary":
        size = oversampling * num_antennas
        grid = -math.pi + 2.0 * math.pi * np.arange(size) / size
        m = np.arange(num_antennas)[:, None]
        atoms = np.exp(1j * m * grid[None, :]) / math.sqrt(num_antennas)
        return SteeringDictionary(atoms=atoms, grid=grid, oversampling=oversampling)


def lift_combiner(z: np.ndarray) -> np.ndarray:
    """2 x 2M real block matrix of the combining row z^H."""
    zr = np.real(z)
    zi = -np.imag(z)  # row vector is the conjugate of the stored column
    m = z.shape[0]
    out = np.empty((2, 2 * m))
    out[0, :m] = zr
    out[0, m:] = -zi
    out[1, :m] = zi
    out[1, m:] = zr
    return out


def lift_channel(h: np.ndarray) -> np.ndarray:
    """Stack [Re h; Im h] into a 2M real vector."""
    return np.concatenate([np.real(h), np.imag(h)])


def rayleigh_quotient(z: np.ndarray, d: np.ndarray, q_pred: np.ndarray, rho: float) -> float:
    """Objective value of the combiner design problem at z."""
    dq = d @ q_pred
    num = z.conj() @ (dq @ q_pred @ d.conj().T) @ z
    den = z.conj() @ (dq @ d.conj().T) @ z + (z.conj() @ z) / rho
    return float(np.real(num) / np.real(den))


def optimal_combiner(
    d: np.ndarray,
    q_pred: np.ndarray,
    rho: float,
    fallback_psi: float | None = None,
) -> Combiner:
    """Principal eigenvector of (D Q D^H + I/rho)^{-1} (D Q^2 D^H), unit norm.

    D has three columns, so the denominator is a rank-<=3 update of I/rho and
    its inverse is applied through a 3x3 solve rather than an explicit M x M
    inversion (identical result, linear cost in M). On a degenerate objective
    (D Q^2 D^H numerically zero) falls back to the array-manifold combiner at
    fallback_psi when given.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    m = d.shape[0]
    q = np.asarray(q_pred, float)
    q2 = q @ q
    gram = d.conj().T @ d  # 3x3
    scale = float(np.real(np.trace(q2 @ gram)))  # tr(D Q^2 D^H)
    if not scale > DEGENERATE_NORM:
        if fallback_psi is None:
            raise ValueError("degenerate combiner objective and no fallback direction")
        z = array_response(m, fallback_psi) / math.sqrt(m)
        return Combiner(z=z, kind="optimal", fallback=True)
    # (D Q D^H + I/rho)^{-1} b = rho (b - D g), (I + rho Q D^H D) g = rho Q D^H b
    core = np.eye(3) + rho * q @ gram
    v = d[:, 0].astype(complex)
    if np.linalg.norm(v) == 0:
        v = np.ones(m, dtype=complex)
    v = v / np.linalg.norm(v)
    for _ in range(POWER_ITERS):
        b = d @ (q2 @ (d.conj().T @ v))  # S_num v
        g = np.linalg.solve(core, rho * (q @ (d.conj().T @ b)))
        w = rho * (b - d @ g)
        nw = np.linalg.norm(w)
        if nw <= DEGENERATE_NORM:
            if fallback_psi is None:
                raise ValueError("power iteration collapsed")
            z = array_response(m, fallback_psi) / math.sqrt(m)
            return Combiner(z=z, kind="optimal", fallback=True)
        w = w / nw
        # Align phase so convergence can be measured by vector difference.
        phase = np.vdot(v, w)
        if abs(phase) > 0:
            w = w * (phase.conjugate() / abs(phase))
        if np.linalg.norm(w - v) < POWER_TOL:
            v = w
            break
        v = w
    return Combiner(z=v / np.linalg.norm(v), kind="optimal")


def hybrid_approximation(
    z_opt: Combiner | np.ndarray, dictionary: SteeringDictionary, num_rf_chains: int
) -> Combiner:
    """Orthogonal-matching-pursuit projection onto N equal-gain atoms.

    Greedily picks the dictionary atom most correlated with the residual,
    refits the digital weights by least squares, and renormalizes.
    """
    target = z_opt.z if isinstance(z_opt, Combiner) else np.asarray(z_opt)
    m = target.shape[0]
    if num_rf_chains < 1:
        raise ValueError("num_rf_chains must be >= 1")
    if num_rf_chains > m:
        raise ValueError("num_rf_chains cannot exceed the antenna count")
    atoms = dictionary.atoms
    chosen: list[int] = []
    residual = target.astype(complex)
    weights = np.zeros(0, dtype=complex)
    for _ in range(num_rf_chains):
        corr = np.abs(atoms.conj().T @ residual)
        corr[chosen] = -1.0
        chosen.append(int(np.argmax(corr)))
        basis = atoms[:, chosen]
        gram = basis.conj().T @ basis
        rhs = basis.conj().T @ target
        try:
            weights = np.linalg.solve(
                gram + 1e-12 * np.trace(gram).real * np.eye(len(chosen)), rhs
            )
        except np.linalg.LinAlgError:
            weights, *_ = np.linalg.lstsq(basis, target, rcond=None)
        residual = target - basis @ weights
    basis = atoms[:, chosen]
    z = basis @ weights
    norm = np.linalg.norm(z)
    if norm == 0:
        weights = np.zeros(num_rf_chains, dtype=complex)
        weights[0] = 1.0
        z = basis @ weights
        norm = np.linalg.norm(z)
    z = z / norm
    weights = weights / norm
    corr_val = float(abs(np.vdot(target, z)) / max(np.linalg.norm(target), 1e-300))
    return Combiner(
        z=z,
        kind="hybrid",
        analog=basis,
        digital=weights,
        correlation=corr_val,
    )


def dft_manifold_combiner(psi_pred: float, num_antennas: int) -> Combiner:
    """Array-manifold combiner d_M(psi)/sqrt(M) pointed at the predicted beam."""
    z = array_response(num_antennas, psi_pred) / math.sqrt(num_antennas)
    return Combiner(z=z, kind="dft_manifold")


def sound_uplink(
    rng: np.random.Generator | None,
    combiner: Combiner,
    chan: ChannelRealization,
    num_antennas: int,
) -> RealSounding:
    """Synthesize r = z^H h(psi) + n, n ~ CN(0, 1/rho), lifted to the real domain.

    Passing rng=None produces the noiseless sample.
    """
    h = chan.beta * array_response(num_antennas, chan.psi)
    r = np.vdot(combiner.z, h)
    if rng is not None:
        scale = math.sqrt(1.0 / (2.0 * chan.rho))
        r = r + scale * (rng.standard_normal() + 1j * rng.standard_normal())
    return RealSounding(
        r_lift=np.array([r.real, r.imag]),
        z_lift=lift_combiner(combiner.z),
        noise_var=1.0 / (2.0 * chan.rho),
    )
