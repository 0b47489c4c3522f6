"""Robust self-testing bounds: extractability ≥ s·β + μ.

The slope s is certified numerically: both the Bell operator and a family of
single-qubit extraction channels are parameterized by one Jordan angle per
party, and s is feasible when the operator

    K(ᾱ) − s·B(ᾱ) − μ·𝟙,   μ = 1 − s·β_Q,

has nonnegative minimum eigenvalue at every angle tuple on a grid.
``bound_search`` bisects on s for the smallest feasible slope; the grid pass
is a chunked, order-independent parallel map with a deterministic
minimum-reduction, so results do not depend on the worker count.

Grid certification is necessary-only evidence for the continuum inequality;
results carry the grid step, the worst grid point and an optional locally
refined minimum so that status stays explicit.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bell import BellFunctional, get_functional
from .quantum import I2, ghz_state, is_dichotomic, min_eigenvalue

HALF_PI = math.pi / 2
QUARTER_PI = math.pi / 4
SQRT2 = math.sqrt(2.0)

DEFAULT_GRID_STEP = math.pi / 60
DEFAULT_S_TOL = 1e-4
DEFAULT_SLACK = 1e-9
SATURATION_TOL = 2e-4  # published constants are rounded to ~4 decimals

#: numerically certified (slope, offset) pairs per operator
ROBUSTNESS_CONSTANTS = {
    "mermin": (0.1875, -0.5),
    "baccari": (0.4897, -3.1552),
    "zhao": (1.0, -1.0 - 2.0 * SQRT2),
}


class BoundSearchError(RuntimeError):
    """Raised when no slope in [0, 1] passes the grid certificate."""


@dataclass(frozen=True)
class JordanPoint:
    """One Jordan angle per party, each in [0, π/2].

    ``branches`` selects the dephasing direction of each party's extraction
    channel (+1 → σ₊, −1 → σ₋); by default it follows the angle (+1 up to and
    including π/4). The distinction only matters exactly at π/4, where the
    channel family is piecewise-defined.
    """

    angles: tuple[float, ...]
    branches: tuple[int, ...] | None = None

    def __post_init__(self):
        for a in self.angles:
            if not 0.0 <= a <= HALF_PI:
                raise ValueError(f"Jordan angle {a!r} outside [0, pi/2]")
        if self.branches is not None:
            if len(self.branches) != len(self.angles):
                raise ValueError("one branch per angle required")
            if any(b not in (-1, 1) for b in self.branches):
                raise ValueError("branches must be +1 or -1")

    def resolved_branches(self) -> tuple[int, ...]:
        if self.branches is not None:
            return self.branches
        return tuple(1 if a <= QUARTER_PI else -1 for a in self.angles)


@dataclass(frozen=True)
class SelfTestBound:
    """Slope/offset pair of the extractability bound plus the game constant.

    ``c`` translates the bound to the nonlocal-game picture:
    ε₂ = c·η with c = 1/(2·c̃·β_alg) and c̃ = s.
    """

    s: float
    mu: float
    beta_q: float
    beta_c: float
    beta_alg: float

    def __post_init__(self):
        if abs(self.s * self.beta_q + self.mu - 1.0) > SATURATION_TOL:
            raise ValueError("bound must reach 1 at maximal violation (mu = 1 - s*beta_q)")
        if self.s <= 0:
            raise ValueError("slope must be positive")

    @property
    def c_tilde(self) -> float:
        return self.s

    @property
    def c(self) -> float:
        return 1.0 / (2.0 * self.c_tilde * self.beta_alg)

    @classmethod
    def from_slope(cls, s: float, functional: BellFunctional) -> "SelfTestBound":
        return cls(
            s=s,
            mu=1.0 - s * functional.beta_q,
            beta_q=functional.beta_q,
            beta_c=functional.beta_c,
            beta_alg=functional.beta_alg,
        )


def published_bound(operator: str) -> SelfTestBound:
    """Robustness constants for a named operator (reproducible via bound_search for mermin)."""
    if operator not in ROBUSTNESS_CONSTANTS:
        raise ValueError(f"no robustness constants for operator {operator!r}")
    s, mu = ROBUSTNESS_CONSTANTS[operator]
    f = get_functional(operator)
    return SelfTestBound(s=s, mu=mu, beta_q=f.beta_q, beta_c=f.beta_c, beta_alg=f.beta_alg)


def extractability_bound(beta: float, bound: SelfTestBound) -> float:
    """Lower bound s·β + μ on the extractability at violation β (unclamped)."""
    if abs(beta) > bound.beta_alg + 1e-9:
        raise ValueError(f"violation {beta!r} exceeds the algebraic bound {bound.beta_alg}")
    return bound.s * beta + bound.mu


def sigma_basis(pair) -> tuple[np.ndarray, np.ndarray]:
    """(σ₊, σ₋) = ((O₀±O₁)/√2) from a party's ideal observable pair."""
    o0, o1 = pair
    plus = (o0 + o1) / SQRT2
    minus = (o0 - o1) / SQRT2
    if not (is_dichotomic(plus) and is_dichotomic(minus)):
        raise ValueError("ideal settings do not span an orthogonal dichotomic basis")
    return plus, minus


def jordan_observable(alpha: float, setting: int, basis) -> np.ndarray:
    """cos(α)·σ₊ + (−1)^setting·sin(α)·σ₋; dichotomic for every α."""
    if not 0.0 <= alpha <= HALF_PI:
        raise ValueError(f"Jordan angle {alpha!r} outside [0, pi/2]")
    if setting not in (0, 1):
        raise ValueError(f"setting must be 0 or 1, got {setting!r}")
    plus, minus = basis
    sign = 1.0 if setting == 0 else -1.0
    return math.cos(alpha) * plus + sign * math.sin(alpha) * minus


def channel_weight(alpha: float) -> float:
    """Mixing weight g(α) = (1+√2)(sin α + cos α − 1); equals 1 at π/4."""
    return (1.0 + SQRT2) * (math.sin(alpha) + math.cos(alpha) - 1.0)


def extraction_channel(alpha: float, rho: np.ndarray, basis, branch: int | None = None) -> np.ndarray:
    """Single-qubit channel Λ(ρ) = (1+g)/2·ρ + (1−g)/2·Γ ρ Γ.

    Γ is σ₊ on [0, π/4] and σ₋ on (π/4, π/2]; ``branch`` overrides the choice
    (only meaningful exactly at π/4). The channel is unital, trace preserving
    and self-adjoint, so applying it to a projector is the same as applying
    its adjoint.
    """
    if not 0.0 <= alpha <= HALF_PI:
        raise ValueError(f"Jordan angle {alpha!r} outside [0, pi/2]")
    plus, minus = basis
    if branch is None:
        branch = 1 if alpha <= QUARTER_PI else -1
    gamma = plus if branch == 1 else minus
    g = channel_weight(alpha)
    return 0.5 * (1.0 + g) * rho + 0.5 * (1.0 - g) * (gamma @ rho @ gamma)


def _bases_for(functional: BellFunctional) -> list[tuple[np.ndarray, np.ndarray]]:
    return [sigma_basis(pair) for pair in functional.ideal_settings]


def _embed_party(mats: np.ndarray, party: int, parties: int) -> np.ndarray:
    """Lift a batch of 2×2 matrices to the full space: 𝟙 ⊗ … ⊗ M ⊗ … ⊗ 𝟙."""
    left = np.eye(2**party, dtype=complex)
    right = np.eye(2 ** (parties - 1 - party), dtype=complex)
    out = np.einsum("ab,ncd,ef->nacebdf", left, mats, right)
    dim = 2**parties
    return out.reshape(mats.shape[0], dim, dim)


def _kron4_batch(factors: list[np.ndarray]) -> np.ndarray:
    """Batched 4-party Kronecker product of (n,2,2) arrays, party 1 leftmost."""
    out = np.einsum("nab,ncd,nef,ngh->nacegbdfh", *factors)
    n = factors[0].shape[0]
    return out.reshape(n, 16, 16)


def certificate_eigenvalues(
    s: float,
    angles: np.ndarray,
    branches: np.ndarray,
    functional: BellFunctional,
    bases=None,
) -> np.ndarray:
    """Minimum eigenvalue of K(ᾱ) − s·B(ᾱ) − μ·𝟙 for a batch of angle tuples.

    ``angles`` and ``branches`` have shape (n, parties); μ is slaved to s via
    μ = 1 − s·β_Q.
    """
    if functional.parties != 4:
        raise ValueError("certificate evaluation supports 4 parties")
    if bases is None:
        bases = _bases_for(functional)
    angles = np.asarray(angles, dtype=float)
    branches = np.asarray(branches, dtype=int)
    n = angles.shape[0]
    mu = 1.0 - s * functional.beta_q

    cos = np.cos(angles)
    sin = np.sin(angles)
    obs = []  # obs[party][setting] -> (n,2,2)
    gammas = []
    for p, (plus, minus) in enumerate(bases):
        c = cos[:, p, None, None]
        d = sin[:, p, None, None]
        obs.append((c * plus + d * minus, c * plus - d * minus))
        gammas.append(np.where(branches[:, p, None, None] == 1, plus, minus))

    bell_op = np.zeros((n, 16, 16), dtype=complex)
    identity_batch = np.broadcast_to(I2, (n, 2, 2))
    for term in functional.terms:
        factors = [
            identity_batch if setting is None else obs[p][setting]
            for p, setting in enumerate(term.settings)
        ]
        bell_op += term.coefficient * _kron4_batch(factors)

    g = (1.0 + SQRT2) * (sin + cos - 1.0)
    pw = 0.5 * (1.0 + g)
    qw = 0.5 * (1.0 - g)
    k_op = np.broadcast_to(ghz_state(4), (n, 16, 16)).copy()
    for p in range(4):
        big_gamma = _embed_party(gammas[p], p, 4)
        k_op = pw[:, p, None, None] * k_op + qw[:, p, None, None] * (
            big_gamma @ k_op @ big_gamma
        )

    cert = k_op - s * bell_op
    idx = np.arange(16)
    cert[:, idx, idx] -= mu
    return np.linalg.eigvalsh(cert)[:, 0].real


def certificate_min_eig(s: float, point: JordanPoint, functional: BellFunctional) -> float:
    """Certificate minimum eigenvalue at a single Jordan point."""
    angles = np.array([point.angles], dtype=float)
    branches = np.array([point.resolved_branches()], dtype=int)
    return float(certificate_eigenvalues(s, angles, branches, functional)[0])


def build_K(point: JordanPoint, functional: BellFunctional | None = None) -> np.ndarray:
    """Extraction channels applied factor-wise to the GHZ projector."""
    if functional is None:
        functional = get_functional("mermin")
    bases = _bases_for(functional)
    branches = point.resolved_branches()
    rho = ghz_state(4)
    for p, alpha in enumerate(point.angles):
        gamma = np.asarray(
            _embed_party(
                np.array([bases[p][0] if branches[p] == 1 else bases[p][1]]), p, 4
            )[0]
        )
        g = channel_weight(alpha)
        rho = 0.5 * (1.0 + g) * rho + 0.5 * (1.0 - g) * (gamma @ rho @ gamma)
    return rho


def is_party_symmetric(functional: BellFunctional) -> bool:
    """True when terms and ideal settings are invariant under party relabeling."""
    pairs = functional.ideal_settings
    for pair in pairs[1:]:
        if not (
            np.allclose(pair[0], pairs[0][0], atol=1e-12)
            and np.allclose(pair[1], pairs[0][1], atol=1e-12)
        ):
            return False
    canonical = sorted((t.coefficient, t.settings) for t in functional.terms)
    for perm in itertools.permutations(range(functional.parties)):
        permuted = sorted(
            (t.coefficient, tuple(t.settings[perm[p]] for p in range(functional.parties)))
            for t in functional.terms
        )
        if permuted != canonical:
            return False
    return True


def snap_grid_step(grid_step: float) -> tuple[float, int]:
    """Snap a requested step to the nearest exact divisor of π/2.

    Accepts steps quoted to a few decimals (π/60 ≈ 0.05236); the interval
    count must come out even so that π/4 lands on a grid node.
    """
    if grid_step <= 0:
        raise ValueError(f"grid step must be positive, got {grid_step!r}")
    intervals = round(HALF_PI / grid_step)
    if intervals < 2 or abs(intervals * grid_step - HALF_PI) > 1e-3:
        raise ValueError(f"grid step {grid_step!r} does not divide pi/2")
    if intervals % 2 != 0:
        raise ValueError(f"grid step {grid_step!r} does not place pi/4 on the grid")
    return HALF_PI / intervals, intervals


def angle_nodes(grid_step: float) -> tuple[np.ndarray, np.ndarray]:
    """Branch-resolved grid nodes on [0, π/2] with π/4 present on both branches.

    Returns (angles, branches) arrays; requires the step to divide π/2 into an
    even number of intervals so that π/4 is a node.
    """
    _, intervals = snap_grid_step(grid_step)
    base = np.linspace(0.0, HALF_PI, intervals + 1)
    mid = intervals // 2
    angles = np.concatenate([base[: mid + 1], [base[mid]], base[mid + 1 :]])
    branches = np.concatenate(
        [np.ones(mid + 1, dtype=int), [-1], -np.ones(intervals - mid, dtype=int)]
    )
    return angles, branches


def _grid_indices(n_nodes: int, parties: int, symmetric: bool) -> np.ndarray:
    if symmetric:
        combos = itertools.combinations_with_replacement(range(n_nodes), parties)
    else:
        combos = itertools.product(range(n_nodes), repeat=parties)
    return np.fromiter(
        (i for combo in combos for i in combo), dtype=np.int32
    ).reshape(-1, parties)


_WORKER: dict = {}


def _init_worker(functional: BellFunctional, node_angles, node_branches, indices) -> None:
    _WORKER["functional"] = functional
    _WORKER["bases"] = _bases_for(functional)
    _WORKER["angles"] = node_angles
    _WORKER["branches"] = node_branches
    _WORKER["indices"] = indices


def _eval_chunk(args) -> tuple:
    """Evaluate one chunk; returns its k smallest (value, node-index-tuple) pairs."""
    s, start, stop, keep = args
    idx = _WORKER["indices"][start:stop]
    angles = _WORKER["angles"][idx]
    branches = _WORKER["branches"][idx]
    values = certificate_eigenvalues(
        s, angles, branches, _WORKER["functional"], _WORKER["bases"]
    )
    keep = min(keep, len(values))
    order = np.argpartition(values, keep - 1)[:keep]
    pairs = sorted((float(values[i]), tuple(int(v) for v in idx[i])) for i in order)
    return pairs


@dataclass(frozen=True)
class GridEvaluation:
    """Deterministic reduction of a grid pass: worst value and worst points."""

    min_eig: float
    worst_point: JordanPoint
    worst_nodes: tuple  # (value, node-index-tuple) pairs, ascending


def evaluate_grid(
    s: float,
    functional: BellFunctional,
    grid_step: float = DEFAULT_GRID_STEP,
    threads: int = 1,
    keep_worst: int = 1,
    chunk_size: int = 4096,
) -> GridEvaluation:
    """Minimum certificate eigenvalue over the full Jordan-angle grid.

    The grid is the product of branch-resolved nodes (reduced to sorted
    tuples when the functional is party-symmetric, which leaves the minimum
    unchanged). Chunks are reduced by (value, point) pairs in fixed order, so
    the result is identical for any worker count.
    """
    node_angles, node_branches = angle_nodes(grid_step)
    symmetric = is_party_symmetric(functional)
    indices = _grid_indices(len(node_angles), functional.parties, symmetric)

    tasks = [
        (s, start, min(start + chunk_size, len(indices)), keep_worst)
        for start in range(0, len(indices), chunk_size)
    ]
    init_args = (functional, node_angles, node_branches, indices)
    if threads > 1:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_init_worker, initargs=init_args
        ) as pool:
            chunk_results = list(pool.map(_eval_chunk, tasks))
    else:
        _init_worker(*init_args)
        chunk_results = [_eval_chunk(t) for t in tasks]

    merged = sorted(pair for chunk in chunk_results for pair in chunk)[:keep_worst]
    min_eig, worst_idx = merged[0]
    worst = JordanPoint(
        angles=tuple(float(node_angles[i]) for i in worst_idx),
        branches=tuple(int(node_branches[i]) for i in worst_idx),
    )
    return GridEvaluation(min_eig=min_eig, worst_point=worst, worst_nodes=tuple(merged))


@dataclass(frozen=True)
class BoundSearchResult:
    bound: SelfTestBound
    grid_step: float
    worst_point: JordanPoint
    min_eig: float
    refined: bool


def _refine_minimum(
    s: float,
    functional: BellFunctional,
    seeds: tuple,
    node_angles: np.ndarray,
    node_branches: np.ndarray,
    grid_step: float,
) -> tuple[float, JordanPoint]:
    """Local (step/4) sub-grid search around the worst coarse points."""
    offsets = np.arange(-2, 3) * (grid_step / 4.0)
    best_val = math.inf
    best_point = None
    for _, node_idx in seeds:
        centers = node_angles[list(node_idx)]
        seed_branches = node_branches[list(node_idx)]
        axes = [np.clip(c + offsets, 0.0, HALF_PI) for c in centers]
        local = np.array(list(itertools.product(*axes)))
        branches = np.where(local <= QUARTER_PI, 1, -1)
        at_quarter = np.abs(local - QUARTER_PI) <= 1e-15
        branches = np.where(at_quarter, seed_branches[None, :], branches)
        values = certificate_eigenvalues(s, local, branches, functional)
        i = int(np.argmin(values))
        if values[i] < best_val:
            best_val = float(values[i])
            best_point = JordanPoint(
                angles=tuple(float(a) for a in local[i]),
                branches=tuple(int(b) for b in branches[i]),
            )
    return best_val, best_point


def bound_search(
    functional: BellFunctional,
    grid_step: float = DEFAULT_GRID_STEP,
    s_tol: float = DEFAULT_S_TOL,
    slack: float = DEFAULT_SLACK,
    threads: int = 1,
    refine: bool = False,
) -> BoundSearchResult:
    """Smallest slope s (bisection on [0, 1]) passing the grid certificate.

    Feasibility of s means the certificate's minimum eigenvalue stays above
    −``slack`` at every grid point; μ is always 1 − s·β_Q. Raises
    :class:`BoundSearchError` when even s = 1 fails, which signals a wrong
    channel family or functional.
    """

    def feasible(s: float) -> bool:
        return evaluate_grid(s, functional, grid_step, threads).min_eig >= -slack

    if not feasible(1.0):
        raise BoundSearchError(
            "certificate infeasible at s=1; channel family does not match the functional"
        )
    lo, hi = 0.0, 1.0
    while hi - lo > s_tol:
        mid = (lo + hi) / 2.0
        if feasible(mid):
            hi = mid
        else:
            lo = mid

    final = evaluate_grid(
        hi, functional, grid_step, threads, keep_worst=100 if refine else 1
    )
    min_eig, worst = final.min_eig, final.worst_point
    if refine:
        node_angles, node_branches = angle_nodes(grid_step)
        refined_val, refined_point = _refine_minimum(
            hi, functional, final.worst_nodes, node_angles, node_branches, grid_step
        )
        if refined_val < min_eig:
            min_eig, worst = refined_val, refined_point
    return BoundSearchResult(
        bound=SelfTestBound.from_slope(hi, functional),
        grid_step=grid_step,
        worst_point=worst,
        min_eig=min_eig,
        refined=refine,
    )
