"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete. Criteria 3 and 4 are expected to FAIL: the quoted robustness
constants (s=0.1875, mu=-0.5) are not certifiable by the Jordan-angle
dephasing construction — a biseparable product state reaches violation 4√2
with extractability 1/2, which caps every valid slope at (2+√2)/16 ≈ 0.2134;
the grid search honestly returns 7/32 = 0.21875. See notes/decisions.md
(outside the package) for the full analysis. The certification pipeline
itself consumes the quoted constants and reproduces all headline numbers.

Criterion 3's grid defaults to the pi/24 smoke size; set GHZCERT_FULL_GRID=1
for the full pi/120 grid (minutes instead of seconds).
"""

import io
import json
import math
import os
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from ghzcert.bell import classical_bound, get_functional, to_game
from ghzcert.certification import (
    CertificationQuery,
    confidence_bound,
    kl,
    max_certified_extractability,
    min_samples,
    noisy_pass_rate,
    operator_context,
)
from ghzcert.cli import dispatch
from ghzcert.quantum import check_density_matrix
from ghzcert.replay import events_from_transcript, events_to_jsonl, parse_events, replay
from ghzcert.rng import rng_for
from ghzcert.selftest import evaluate_grid, published_bound
from ghzcert.simulate import IIDNoisy, RoundRecord, Transcript, run_protocol

THREADS = min(4, os.cpu_count() or 1)


def check(num: int, description: str, ok: bool, elapsed: float) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num}: {status} - {description} [{elapsed:.2f}s]")
    assert ok, f"criterion {num} failed: {description}"


def run_cli(argv) -> tuple[int, str]:
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        code = dispatch(argv)
    return code, buffer.getvalue()


def test_criterion_1_headline_reproduction():
    t0 = time.perf_counter()
    code, out = run_cli(
        ["certify", "--n", "4643", "--delta", "0.01", "--pass-rate", "0.973",
         "--operator", "mermin"]
    )
    elapsed = time.perf_counter() - t0
    value = json.loads(out)["certified_extractability"]
    ok = code == 0 and abs(value - 0.896) <= 0.002 and elapsed < 1.0
    check(1, f"certify(N=4643, delta=0.01, P=0.973) = {value:.4f} (0.896 +/- 0.002)",
          ok, elapsed)


def test_criterion_2_asymptotic_ceiling():
    t0 = time.perf_counter()
    _, game, bound = operator_context("mermin")
    query = CertificationQuery(
        n=10**7, delta=0.01, pass_rate=0.973, bound=bound, p_qm=game.p_qm,
        mu_meas=(10**7 - 1) / 10**7,
    )
    value = max_certified_extractability(query).certified_extractability
    elapsed = time.perf_counter() - t0
    ok = abs(value - 0.919) <= 0.001 and elapsed < 1.0
    check(2, f"certified extractability at N=1e7 = {value:.4f} (0.919 +/- 0.001)",
          ok, elapsed)


def test_criterion_3_table_constants_and_certificate_feasibility():
    t0 = time.perf_counter()
    saturation_ok = all(
        abs(published_bound(op).s * published_bound(op).beta_q
            + published_bound(op).mu - 1.0) <= 2e-4
        for op in ("mermin", "baccari", "zhao")
    )
    full = os.environ.get("GHZCERT_FULL_GRID") == "1"
    grid_step = math.pi / 120 if full else math.pi / 24
    result = evaluate_grid(0.1875, get_functional("mermin"), grid_step=grid_step,
                           threads=THREADS)
    elapsed = time.perf_counter() - t0
    feasible_ok = result.min_eig >= -1e-6
    limit = 1800.0 if full else 60.0
    ok = saturation_ok and feasible_ok and elapsed < limit
    check(
        3,
        f"s*beta_Q+mu=1 within 2e-4 (all operators): {saturation_ok}; "
        f"(0.1875,-0.5) certificate min eig at pi/{120 if full else 24} grid = "
        f"{result.min_eig:.4g} (need >= -1e-6)",
        ok, elapsed,
    )


def test_criterion_4_bound_search():
    t0 = time.perf_counter()
    code, out = run_cli(
        ["bound", "--operator", "mermin", "--grid-step", repr(math.pi / 60),
         "--s-tol", "1e-4", "--threads", str(THREADS)]
    )
    elapsed = time.perf_counter() - t0
    doc = json.loads(out)
    s, mu = doc["s"], doc["mu"]
    ok = (
        code == 0 and 0.185 <= s <= 0.190
        and abs(mu - (1 - 8 * s)) <= 1e-9 and elapsed < 1800.0
    )
    check(4, f"bound search at pi/60 returned s = {s:.6f} (need within [0.185, 0.190])",
          ok, elapsed)


def test_criterion_5_classical_bounds_by_exhaustion():
    t0 = time.perf_counter()
    values = {op: classical_bound(get_functional(op))
              for op in ("mermin", "baccari", "zhao")}
    elapsed = time.perf_counter() - t0
    ok = (
        values == {"mermin": 4.0, "baccari": 6.0, "zhao": 4.0} and elapsed < 1.0
    )
    check(5, f"exhaustive classical bounds = {values} (need 4/6/4 exactly)", ok, elapsed)


def test_criterion_6_sample_efficiency_ordering():
    t0 = time.perf_counter()
    required = {}
    for op in ("mermin", "baccari", "zhao"):
        _, game, bound = operator_context(op)
        required[op] = min_samples(0.01, 0.25, noisy_pass_rate(op, 0.05),
                                   game.p_qm, bound)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(required["mermin"] - 155) <= 5
        and required["baccari"] >= 10 * required["mermin"]
        and required["zhao"] >= 10 * required["mermin"]
        and elapsed < 1.0
    )
    check(6, f"N(eta=0.25, alpha=0.05) = {required} (mermin 155 +/- 5, others >= 10x)",
          ok, elapsed)


def test_criterion_7_simulator_statistics():
    t0 = time.perf_counter()
    game = to_game(get_functional("mermin"))
    noisy, _ = run_protocol(IIDNoisy(0.05), game, n_rounds=100_001, n_cert=1, seed=2024)
    sigma = math.sqrt(0.975 * 0.025 / 100_000)
    noisy_ok = abs(noisy.pass_rate - 0.975) <= 3 * sigma
    ideal, _ = run_protocol(IIDNoisy(0.0), game, n_rounds=100_001, n_cert=1, seed=2025)
    ideal_ok = ideal.n_win == 100_000
    elapsed = time.perf_counter() - t0
    ok = noisy_ok and ideal_ok and elapsed < 60.0
    check(
        7,
        f"1e5-round empirical P = {noisy.pass_rate:.5f} (0.975 +/- 3 sigma = "
        f"{3 * sigma:.5f}); ideal wins {ideal.n_win}/100000 exactly",
        ok, elapsed,
    )


def test_criterion_8_end_to_end_replay(tmp_path):
    t0 = time.perf_counter()
    game = to_game(get_functional("mermin"))
    _, _, bound = operator_context("mermin")
    n_windows, wins = 4644, 4518  # wins/(n-1) brackets 0.973 after one holdout
    rng = rng_for(314159, 0, 42)
    won_flags = np.zeros(n_windows, dtype=bool)
    won_flags[:wins] = True
    rng.shuffle(won_flags)
    rounds = []
    for j in range(n_windows):
        term_index = int(rng.choice(len(game.functional.terms),
                                    p=game.input_distribution))
        term = game.functional.terms[term_index]
        target = term.sign if won_flags[j] else -term.sign
        rounds.append(RoundRecord(j, term.settings, (1, 1, 1, target), bool(won_flags[j]), False))
    transcript = Transcript(tuple(rounds), n_windows, wins, wins / n_windows, 314159)

    path = tmp_path / "synthetic.jsonl"
    path.write_text(events_to_jsonl(events_from_transcript(transcript)))
    with open(path, encoding="utf-8") as handle:
        events = parse_events(handle)
    result = replay(events, game, bound, mode="strict", delta=0.01, seed=77)
    value = result["report"].certified_extractability
    elapsed = time.perf_counter() - t0
    ok = (
        result["n"] == 4644 and result["feasible"]
        and abs(value - 0.896) <= 0.004 and elapsed < 10.0
    )
    check(
        8,
        f"strict replay of 4644 synthetic windows (P={result['pass_rate']:.5f}) "
        f"certified {value:.4f} (0.896 +/- 0.004)",
        ok, elapsed,
    )


def test_criterion_9_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)

    # KL nonnegativity, 1e3 random pairs
    kl_ok = True
    for _ in range(1000):
        p1, p2 = rng.uniform(1e-9, 1 - 1e-9, size=2)
        kl_ok &= kl(p1, p2) >= 0.0

    # confidence-bound monotonicity in N and in the threshold, 1e3 cases
    mono_ok = True
    cases = 0
    while cases < 1000:
        p2 = rng.uniform(0.3, 0.95)
        p1 = p2 + rng.uniform(0.005, 1 - p2 - 1e-6)
        n = int(rng.integers(3, 5000))
        here = confidence_bound(n, (n - 1) / n, p1, p2)
        if here < 1e-250:  # strict ordering is not representable past underflow
            continue
        cases += 1
        mono_ok &= confidence_bound(n + 1, n / (n + 1), p1, p2) < here
        mono_ok &= confidence_bound(n, (n - 1) / n, min(p1 + 0.002, 1.0), p2) < here

    # round-trip N <-> eta consistency on random feasible queries
    _, game, bound = operator_context("mermin")
    trip_ok = True
    for _ in range(50):
        n = int(rng.integers(100, 20000))
        p = rng.uniform(0.96, 0.999)
        query = CertificationQuery(n=n, delta=0.01, pass_rate=p, bound=bound,
                                   p_qm=game.p_qm, mu_meas=(n - 1) / n)
        report = max_certified_extractability(query)
        if not report.feasible:
            continue
        back = min_samples(0.01, report.eta, p, game.p_qm, bound)
        trip_ok &= back <= n <= back + 1

    # density-matrix positivity for every constructor output, 1e3 cases
    from ghzcert.quantum import ghz_state, maximally_mixed, noisy_ghz

    dm_ok = True
    for alpha in rng.uniform(0, 1, size=1000):
        check_density_matrix(noisy_ghz(float(alpha)))
    check_density_matrix(ghz_state(4))
    check_density_matrix(maximally_mixed(16))

    # determinism under varying worker counts
    f = get_functional("mermin")
    reference = evaluate_grid(0.2, f, grid_step=math.pi / 12, threads=1)
    det_ok = all(
        evaluate_grid(0.2, f, grid_step=math.pi / 12, threads=k) == reference
        for k in (2, 3)
    )
    t1, _ = run_protocol(IIDNoisy(0.1), game, n_rounds=300, n_cert=1, seed=1)
    t2, _ = run_protocol(IIDNoisy(0.1), game, n_rounds=300, n_cert=1, seed=1)
    det_ok &= t1 == t2

    elapsed = time.perf_counter() - t0
    ok = kl_ok and mono_ok and trip_ok and dm_ok and det_ok
    check(
        9,
        "property suites (KL >= 0, confidence monotonicity, N<->eta round trip, "
        "density positivity, thread determinism)",
        ok, elapsed,
    )
