"""Road-aware beamforming codebook construction.

The served road interval is split into beam-regions in the spatial-frequency
domain. Equal geographic slices near the road center convert to wide
beam-regions, while slices near the edge collapse below the minimum width
2*nu_ub/Q'; those are clamped to the minimum so neighboring codewords do not
pile onto the same direction. Each region's uniform position density is
transformed into a target gain pattern integrating to 2*pi/M, and a
hybrid-constrained codeword is fitted to it by alternating projections
between the target magnitude and the equal-gain feasible set.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .array_channel import RoadGeometry
from .sounding import SteeringDictionary, hybrid_approximation

DEFAULT_GRID = 4096
GS_ITERS = 50
GS_INITS = 8
_TILE_EPS = 1e-12


@dataclass(frozen=True)
class BeamRegion:
    """One codeword's spatial-frequency interval and its geographic preimage."""

    nu_lb: float
    nu_ub: float
    rho_lb: float
    rho_ub: float

    @property
    def width(self) -> float:
        return self.nu_ub - self.nu_lb


@dataclass(frozen=True)
class Codeword:
    u: np.ndarray  # complex M-vector, unit norm
    region: BeamRegion
    bp_samples: np.ndarray  # normalized gain on the psi grid
    mse: float


@dataclass(frozen=True)
class Codebook:
    num_antennas: int
    num_rf_chains: int
    y_design: float
    rsu_height: float
    resolutions: tuple[int, ...]
    codewords: tuple[Codeword, ...]
    grid_size: int = DEFAULT_GRID

    @property
    def size(self) -> int:
        return len(self.codewords)

    def bp_matrix(self) -> np.ndarray:
        return np.stack([c.bp_samples for c in self.codewords])

    def resolution_slices(self) -> list[slice]:
        out, start = [], 0
        for q in self.resolutions:
            out.append(slice(start, start + q))
            start += q
        return out


def psi_grid(grid_size: int = DEFAULT_GRID) -> np.ndarray:
    """Uniform cell-centered spatial-frequency grid covering (-pi, pi]."""
    delta = 2.0 * math.pi / grid_size
    return -math.pi + (np.arange(grid_size) + 0.5) * delta


def integrate_bp(values: np.ndarray) -> float:
    """Periodic trapezoid integral over the full grid."""
    return float(np.sum(values) * 2.0 * math.pi / values.shape[0])


def geo_to_spatial(x, k: float):
    """psi = pi x / sqrt(x^2 + k^2) with k the off-road distance."""
    x = np.asarray(x, float)
    out = math.pi * x / np.sqrt(x * x + k * k)
    return float(out) if out.ndim == 0 else out


def spatial_to_geo(psi, k: float):
    """Inverse transform x = k psi / sqrt(pi^2 - psi^2)."""
    psi = np.asarray(psi, float)
    out = k * psi / np.sqrt(math.pi**2 - psi * psi)
    return float(out) if out.ndim == 0 else out


def _off_road_distance(geom: RoadGeometry, y_design: float) -> float:
    return math.sqrt(y_design**2 + geom.rsu_height_m**2)


def _divide_half(k: float, rho_ub: float, nu_ub: float, q_prime: int) -> list[tuple[float, float]]:
    """Build the positive-axis beam-regions left to right from 0."""
    nu_min = 2.0 * nu_ub / q_prime
    rho_slice = 2.0 * rho_ub / q_prime
    regions: list[tuple[float, float]] = []
    nu_prev = 0.0
    while nu_prev < nu_ub - _TILE_EPS:
        rho_prev = spatial_to_geo(nu_prev, k)
        converted = geo_to_spatial(rho_prev + rho_slice, k) - nu_prev
        nu_next = nu_prev + max(nu_min, converted)
        if nu_ub - nu_next < nu_min:  # absorb the tail into this region
            nu_next = nu_ub
        regions.append((nu_prev, nu_next))
        nu_prev = nu_next
    return regions


def divide_regions(geom: RoadGeometry, y_design: float, num_regions: int) -> list[BeamRegion]:
    """Partition the full beam range into num_regions regions.

    The positive half applies the width rule max(min width, converted equal
    geographic slice); the negative half mirrors it. The division count is
    raised by two per round until exactly num_regions regions tile the range.
    """
    if num_regions < 2 or num_regions % 2:
        raise ValueError("num_regions must be an even integer >= 2")
    if not math.isclose(-geom.range_lb_m, geom.range_ub_m):
        raise ValueError("region division expects a symmetric road range")
    k = _off_road_distance(geom, y_design)
    rho_ub = geom.range_ub_m
    nu_ub = geo_to_spatial(rho_ub, k)
    if nu_ub <= 0:
        raise ValueError("geometry yields an empty beam range")
    q_prime = num_regions
    while q_prime <= 512 * num_regions:
        halves = _divide_half(k, rho_ub, nu_ub, q_prime)
        if 2 * len(halves) == num_regions:
            pos = [
                BeamRegion(a, b, spatial_to_geo(a, k), spatial_to_geo(b, k))
                for a, b in halves
            ]
            neg = [
                BeamRegion(-b, -a + 0.0, -spatial_to_geo(b, k), -spatial_to_geo(a, k) + 0.0)
                for a, b in reversed(halves)
            ]
            return neg + pos
        if 2 * len(halves) > num_regions:
            raise ValueError(
                f"division produced {2 * len(halves)} regions for target {num_regions}"
            )
        q_prime += 2
    raise ValueError("beam-region division did not converge")


def narrowing_threshold(geom: RoadGeometry, y_design: float, num_regions: int) -> float:
    """Position beyond which equal geographic slices convert to beam-regions
    narrower than the equal split: x* = sqrt(|rho| (|rho| + k Q)) / 2."""
    k = _off_road_distance(geom, y_design)
    full = geom.range_ub_m - geom.range_lb_m
    return math.sqrt(full * (full + k * num_regions)) / 2.0


def position_pdf_to_bp(
    region: BeamRegion,
    y_design: float,
    h: float,
    num_antennas: int,
    grid_size: int = DEFAULT_GRID,
) -> np.ndarray:
    """Target gain pattern (2 pi / M) * f_nu(psi) sampled on the psi grid.

    Samples are cell averages; the closed-form antiderivative of the
    transformed density is the inverse position map, so the sampled pattern
    integrates to exactly 2 pi / M. Peaks above unit gain mean the region is
    oversampled (unrealizable) and are flagged with a warning.
    """
    if region.nu_ub <= region.nu_lb:
        raise ValueError("empty beam region")
    k = math.sqrt(y_design**2 + h**2)
    grid = psi_grid(grid_size)
    delta = 2.0 * math.pi / grid_size
    lo = np.clip(grid - delta / 2.0, region.nu_lb, region.nu_ub)
    hi = np.clip(grid + delta / 2.0, region.nu_lb, region.nu_ub)
    mass = (spatial_to_geo(hi, k) - spatial_to_geo(lo, k)) / (region.rho_ub - region.rho_lb)
    g = (2.0 * math.pi / num_antennas) * mass / delta
    peak = float(g.max())
    if peak > 1.0 + 1e-6:
        warnings.warn(
            f"oversampled beam-region [{region.nu_lb:.4f}, {region.nu_ub:.4f}): "
            f"target gain peaks at {peak:.3f} > 1",
            RuntimeWarning,
            stacklevel=2,
        )
    return g


class _PatternContext:
    """Steering matrix on the psi grid, cached per (M, grid size)."""

    _cache: dict[tuple[int, int], "_PatternContext"] = {}

    def __init__(self, num_antennas: int, grid_size: int):
        grid = psi_grid(grid_size)
        m = np.arange(num_antennas)[:, None]
        self.steering = np.exp(1j * m * grid[None, :])  # M x L
        self.num_antennas = num_antennas
        self.grid_size = grid_size
        self.delta = 2.0 * math.pi / grid_size
        self._atom_bp: dict[int, np.ndarray] = {}

    def atom_bp(self, dictionary: SteeringDictionary) -> np.ndarray:
        key = dictionary.oversampling
        if key not in self._atom_bp:
            p = self.steering.conj().T @ dictionary.atoms
            self._atom_bp[key] = np.abs(p) ** 2 / self.num_antennas
        return self._atom_bp[key]

    @classmethod
    def get(cls, num_antennas: int, grid_size: int) -> "_PatternContext":
        key = (num_antennas, grid_size)
        if key not in cls._cache:
            cls._cache[key] = cls(num_antennas, grid_size)
        return cls._cache[key]

    def pattern(self, u: np.ndarray) -> np.ndarray:
        return self.steering.conj().T @ u

    def bp(self, u: np.ndarray) -> np.ndarray:
        return np.abs(self.pattern(u)) ** 2 / self.num_antennas

    def backproject(self, p: np.ndarray) -> np.ndarray:
        # Uniform full-period grid makes steering @ steering^H = L I.
        return self.steering @ p / self.grid_size

    def mse(self, g_target: np.ndarray, bp: np.ndarray) -> float:
        return float(np.sum((g_target - bp) ** 2) * self.delta)


def fit_codeword(
    g_target: np.ndarray,
    num_antennas: int,
    num_rf_chains: int,
    dictionary: SteeringDictionary,
    rng: np.random.Generator,
    region: BeamRegion | None = None,
    iters: int = GS_ITERS,
    inits: int = GS_INITS,
) -> Codeword:
    """Fit a hybrid-constrained codeword whose gain pattern tracks g_target.

    Candidates come from alternating projections between the target magnitude
    sqrt(M * g_target) and the equal-gain feasible set, started from random
    phases, plus two safeguards: the best single dictionary atom and the
    feasible projection of the zero-phase target. The lowest squared-error
    candidate wins.
    """
    ctx = _PatternContext.get(num_antennas, g_target.shape[0])
    grid_size = g_target.shape[0]
    amplitude = np.sqrt(num_antennas * np.asarray(g_target, float))

    best_u: np.ndarray | None = None
    best_mse = math.inf

    def consider(u: np.ndarray):
        nonlocal best_u, best_mse
        err = ctx.mse(g_target, ctx.bp(u))
        if err < best_mse:
            best_mse = err
            best_u = u

    # Alternating-projection candidates from random phase starts, iterated as
    # one M x inits batch so the grid transforms are single matmuls.
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(grid_size, inits))
    batch = ctx.steering @ (amplitude[:, None] * np.exp(1j * phases)) / grid_size
    for _ in range(iters):
        for col in range(inits):
            batch[:, col] = hybrid_approximation(
                batch[:, col], dictionary, num_rf_chains
            ).z
        patterns = ctx.steering.conj().T @ batch  # L x inits
        bps = np.abs(patterns) ** 2 / num_antennas
        errs = np.sum((bps - g_target[:, None]) ** 2, axis=0) * ctx.delta
        col = int(np.argmin(errs))
        if errs[col] < best_mse:
            best_mse = float(errs[col])
            best_u = batch[:, col].copy()
        mags = np.abs(patterns)
        unit = np.where(mags > 0, patterns / np.where(mags > 0, mags, 1.0), 1.0)
        batch = ctx.steering @ (amplitude[:, None] * unit) / grid_size

    # Feasible projection of the zero-phase target.
    consider(hybrid_approximation(ctx.backproject(amplitude.astype(complex)),
                                  dictionary, num_rf_chains).z)

    # Best single steering atom, expressed as a hybrid vector.
    atom_bp = ctx.atom_bp(dictionary)
    atom_mse = np.sum((atom_bp - g_target[:, None]) ** 2, axis=0) * ctx.delta
    consider(hybrid_approximation(dictionary.atoms[:, int(np.argmin(atom_mse))],
                                  dictionary, num_rf_chains).z)

    assert best_u is not None
    bp = ctx.bp(best_u)
    return Codeword(u=best_u, region=region, bp_samples=bp, mse=best_mse)


def _fit_task(args):
    (geom, y_design, num_antennas, num_rf_chains, region, seed_key,
     grid_size, iters, inits, oversampling) = args
    dictionary = SteeringDictionary.build(num_antennas, oversampling)
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g = position_pdf_to_bp(region, y_design, geom.rsu_height_m, num_antennas, grid_size)
    return fit_codeword(
        g, num_antennas, num_rf_chains, dictionary, rng,
        region=region, iters=iters, inits=inits,
    )


def default_workers() -> int:
    env = os.environ.get("V2I_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def build_codebook(
    geom: RoadGeometry,
    y_design: float,
    num_antennas: int,
    num_rf_chains: int,
    codewords: int | list[int] | tuple[int, ...],
    seed: int = 0,
    grid_size: int = DEFAULT_GRID,
    iters: int = GS_ITERS,
    inits: int = GS_INITS,
    oversampling: int = 4,
    workers: int | None = None,
) -> Codebook:
    """Design a codebook; a list of codeword counts yields the concatenation
    of independent per-resolution designs."""
    resolutions = (codewords,) if isinstance(codewords, int) else tuple(codewords)
    tasks = []
    for res_idx, q in enumerate(resolutions):
        regions = divide_regions(geom, y_design, q)
        for reg_idx, region in enumerate(regions):
            tasks.append(
                (geom, y_design, num_antennas, num_rf_chains, region,
                 [seed, res_idx, reg_idx], grid_size, iters, inits, oversampling)
            )
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(_fit_task, tasks, chunksize=4))
    else:
        fitted = [_fit_task(t) for t in tasks]
    return Codebook(
        num_antennas=num_antennas,
        num_rf_chains=num_rf_chains,
        y_design=y_design,
        rsu_height=geom.rsu_height_m,
        resolutions=resolutions,
        codewords=tuple(fitted),
        grid_size=grid_size,
    )


def validate(book: Codebook) -> dict:
    """Partition and Parseval checks; returns measured worst-case numbers."""
    k = math.sqrt(book.y_design**2 + book.rsu_height**2)
    gap = 0.0
    for sl in book.resolution_slices():
        regions = [c.region for c in book.codewords[sl]]
        for left, right in zip(regions, regions[1:]):
            gap = max(gap, abs(right.nu_lb - left.nu_ub))
    target = 2.0 * math.pi / book.num_antennas
    integrals = [integrate_bp(c.bp_samples) for c in book.codewords]
    peak = max(float(c.bp_samples.max()) for c in book.codewords)
    norm_err = max(abs(np.linalg.norm(c.u) - 1.0) for c in book.codewords)
    return {
        "partition_gap": gap,
        "parseval_rel_err": max(abs(v - target) / target for v in integrals),
        "bp_peak": peak,
        "unit_norm_err": float(norm_err),
        "k": k,
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def save_codebook(book: Codebook, path: str) -> None:
    """Write the codebook as JSON with floats as decimal strings so a reload
    reproduces every bit."""
    doc = {
        "M": book.num_antennas,
        "N": book.num_rf_chains,
        "Q": book.size,
        "y_design": _fmt(book.y_design),
        "h": _fmt(book.rsu_height),
        "L": book.grid_size,
        "resolutions": list(book.resolutions),
        "regions": [
            {
                "nu_lb": _fmt(c.region.nu_lb),
                "nu_ub": _fmt(c.region.nu_ub),
                "rho_lb": _fmt(c.region.rho_lb),
                "rho_ub": _fmt(c.region.rho_ub),
            }
            for c in book.codewords
        ],
        "codewords": [
            [[_fmt(v.real), _fmt(v.imag)] for v in c.u] for c in book.codewords
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_codebook(path: str) -> Codebook:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    m = int(doc["M"])
    grid_size = int(doc.get("L", DEFAULT_GRID))
    ctx = _PatternContext.get(m, grid_size)
    words = []
    for reg, vec in zip(doc["regions"], doc["codewords"]):
        region = BeamRegion(
            nu_lb=float(reg["nu_lb"]),
            nu_ub=float(reg["nu_ub"]),
            rho_lb=float(reg["rho_lb"]),
            rho_ub=float(reg["rho_ub"]),
        )
        u = np.array([float(re) + 1j * float(im) for re, im in vec])
        words.append(Codeword(u=u, region=region, bp_samples=ctx.bp(u), mse=math.nan))
    return Codebook(
        num_antennas=m,
        num_rf_chains=int(doc["N"]),
        y_design=float(doc["y_design"]),
        rsu_height=float(doc["h"]),
        resolutions=tuple(int(q) for q in doc["resolutions"]),
        codewords=tuple(words),
        grid_size=grid_size,
    )
