"""Monte Carlo simulation of the full certification protocol.

A source emits N states in round order, N_c uniformly chosen rounds are held
out, the rest are measured: each round draws a game input, samples the joint
±1 outcome tuple from the Born rule, and is scored by the win predicate. The
resulting pass rate feeds the finite-sample inversion.

Besides the white-noise IID source, two deliberately non-IID sources exist to
exercise the pipeline under drift and block correlations; they are stress
models, not adversary models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bell import NonlocalGame, _validate_settings
from .certification import CertificationQuery, CertificationReport, max_certified_extractability
from .quantum import ghz_state, maximally_mixed, noisy_ghz
from .rng import TAG_BLOCK, TAG_HOLDOUT, TAG_INPUT, TAG_OUTCOME, rng_for
from .selftest import SelfTestBound

PROBABILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class IIDNoisy:
    """Same white-noise state every round."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"noise fraction must be in [0, 1], got {self.alpha!r}")

    def alpha_at(self, index: int, n_rounds: int, seed: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class Drifting:
    """Noise fraction drifts linearly with the round index."""

    alpha_start: float
    alpha_end: float

    def __post_init__(self):
        for a in (self.alpha_start, self.alpha_end):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"noise fraction must be in [0, 1], got {a!r}")

    def alpha_at(self, index: int, n_rounds: int, seed: int) -> float:
        if n_rounds <= 1:
            return self.alpha_start
        frac = index / (n_rounds - 1)
        return self.alpha_start + (self.alpha_end - self.alpha_start) * frac


@dataclass(frozen=True)
class BlockCorrelated:
    """Contiguous blocks share a noise level; a seeded fraction of blocks is bad."""

    alpha_good: float
    alpha_bad: float
    block_length: int
    bad_fraction: float = 0.1

    def __post_init__(self):
        for a in (self.alpha_good, self.alpha_bad):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"noise fraction must be in [0, 1], got {a!r}")
        if self.block_length < 1:
            raise ValueError(f"block length must be >= 1, got {self.block_length}")
        if not 0.0 <= self.bad_fraction <= 1.0:
            raise ValueError(f"bad fraction must be in [0, 1], got {self.bad_fraction!r}")

    def alpha_at(self, index: int, n_rounds: int, seed: int) -> float:
        block = index // self.block_length
        bad = rng_for(seed, block, TAG_BLOCK).random() < self.bad_fraction
        return self.alpha_bad if bad else self.alpha_good


SourceModel = IIDNoisy | Drifting | BlockCorrelated


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round; held-out rounds carry no inputs or outcomes."""

    round_index: int
    input: tuple | None
    outcomes: tuple | None
    won: bool | None
    held_out: bool

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "input": None if self.input is None else list(self.input),
            "outcomes": None if self.outcomes is None else list(self.outcomes),
            "won": self.won,
            "held_out": self.held_out,
        }


@dataclass(frozen=True)
class Transcript:
    rounds: tuple
    n: int
    n_win: int
    pass_rate: float
    seed: int

    def measured_rounds(self) -> list[RoundRecord]:
        return [r for r in self.rounds if not r.held_out]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r.to_dict()) for r in self.rounds) + "\n"


def outcome_table(rho: np.ndarray, settings) -> np.ndarray:
    """Joint Born-rule table P(outcomes | inputs), shape (2,2,2,2, 2,2,2,2).

    First four axes are the per-party inputs, last four the outcome bits
    (bit 0 ↔ outcome +1). Vanishing probabilities are floored to exact zero
    so that deterministic games stay deterministic under sampling.
    """
    _validate_settings(settings, 4)
    rho_t = np.asarray(rho, dtype=complex).reshape((2,) * 8)
    projs = []
    eye = np.eye(2, dtype=complex)
    for pair in settings:
        projs.append(
            np.array([[(eye + o * obs) / 2.0 for o in (1.0, -1.0)] for obs in pair])
        )
    table = np.einsum(
        "abcdefgh,IWea,JXfb,KYgc,LZhd->IJKLWXYZ",
        rho_t, projs[0], projs[1], projs[2], projs[3],
    ).real
    table[table < PROBABILITY_FLOOR] = 0.0
    norm = table.reshape(16, 16).sum(axis=1)
    if np.max(np.abs(norm - 1.0)) > 1e-9:
        raise ValueError("outcome table rows do not sum to 1; invalid state or settings")
    table /= norm.reshape(2, 2, 2, 2, 1, 1, 1, 1)
    return table


_OUTCOME_TUPLES = [
    tuple(1 if (idx >> (3 - p)) & 1 == 0 else -1 for p in range(4)) for idx in range(16)
]


def _draw_round(
    table: np.ndarray, game: NonlocalGame, rng_in: np.random.Generator,
    rng_out: np.random.Generator,
) -> tuple[tuple, tuple, int]:
    """(input, outcomes, term_index) for one measured round."""
    terms = game.functional.terms
    term_index = int(rng_in.choice(len(terms), p=game.input_distribution))
    term = terms[term_index]
    inputs = []
    for setting in term.settings:
        inputs.append(int(rng_in.integers(0, 2)) if setting is None else setting)
    inputs = tuple(inputs)
    row = table[inputs].reshape(16)
    outcome_index = int(rng_out.choice(16, p=row))
    return inputs, _OUTCOME_TUPLES[outcome_index], term_index


def sample_round(
    rho: np.ndarray, game: NonlocalGame, settings=None,
    rng: np.random.Generator | None = None,
) -> RoundRecord:
    """One measured round on an explicit state (input draw, Born sample, score)."""
    if settings is None:
        settings = game.functional.ideal_settings
    if rng is None:
        rng = np.random.default_rng()
    table = outcome_table(rho, settings)
    inputs, outcomes, term_index = _draw_round(table, game, rng, rng)
    return RoundRecord(
        round_index=0,
        input=inputs,
        outcomes=outcomes,
        won=game.won(term_index, outcomes),
        held_out=False,
    )


def draw_holdout(n_rounds: int, n_cert: int, rng: np.random.Generator) -> set[int]:
    """Roll an n-faced die until n_cert distinct indices are obtained."""
    held: set[int] = set()
    while len(held) < n_cert:
        held.add(int(rng.integers(0, n_rounds)))
    return held


def run_protocol(
    source: SourceModel,
    game: NonlocalGame,
    settings=None,
    bound: SelfTestBound | None = None,
    n_rounds: int = 1000,
    n_cert: int = 1,
    delta: float = 0.01,
    seed: int = 0,
) -> tuple[Transcript, CertificationReport | None]:
    """Run the full protocol: emit, hold out, measure, score, certify.

    The certification report is produced when ``bound`` is given; the
    transcript alone is returned otherwise. Identical (source, N, N_c, seed)
    give bit-identical transcripts.
    """
    if not 1 <= n_cert < n_rounds:
        raise ValueError(f"need 1 <= n_cert < n_rounds, got {n_cert}, {n_rounds}")
    if settings is None:
        settings = game.functional.ideal_settings

    table_ghz = outcome_table(ghz_state(4), settings)
    table_mixed = outcome_table(maximally_mixed(16), settings)

    held = draw_holdout(n_rounds, n_cert, rng_for(seed, 0, TAG_HOLDOUT))
    rounds = []
    n_win = 0
    for j in range(n_rounds):
        if j in held:
            rounds.append(RoundRecord(j, None, None, None, True))
            continue
        alpha = source.alpha_at(j, n_rounds, seed)
        table = (1.0 - alpha) * table_ghz + alpha * table_mixed
        inputs, outcomes, term_index = _draw_round(
            table, game, rng_for(seed, j, TAG_INPUT), rng_for(seed, j, TAG_OUTCOME)
        )
        won = game.won(term_index, outcomes)
        n_win += won
        rounds.append(RoundRecord(j, inputs, outcomes, won, False))

    measured = n_rounds - n_cert
    pass_rate = n_win / measured
    transcript = Transcript(
        rounds=tuple(rounds), n=n_rounds, n_win=n_win, pass_rate=pass_rate, seed=seed
    )
    if bound is None:
        return transcript, None
    query = CertificationQuery(
        n=n_rounds,
        delta=delta,
        pass_rate=pass_rate,
        bound=bound,
        p_qm=game.p_qm,
        mu_meas=measured / n_rounds,
    )
    return transcript, max_certified_extractability(query)
