"""Event-file parsing and the strict/decomposed replay pipeline."""

import json
import math

import numpy as np
import pytest

from ghzcert.bell import baccari_functional, mermin_functional, to_game
from ghzcert.certification import operator_context
from ghzcert.replay import (
    EventRecord,
    decomposed,
    events_from_transcript,
    events_to_jsonl,
    hold_out,
    parse_events,
    replay,
    strict_select,
)
from ghzcert.rng import TAG_HOLDOUT, rng_for
from ghzcert.simulate import IIDNoisy, run_protocol

MERMIN_GAME = to_game(mermin_functional())

WIN = (1, 1, 1, 1)      # product +1
LOSE = (-1, 1, 1, 1)    # product -1


def event(window_id, input=(0, 0, 0, 0), t_ps=0, outcomes=WIN):
    return {"window_id": window_id, "input": list(input), "t_ps": t_ps,
            "outcomes": list(outcomes)}


def as_lines(docs):
    return [json.dumps(d) for d in docs]


def test_parse_empty_stream():
    assert parse_events([]) == []


def test_parse_preserves_order():
    docs = [event(0, t_ps=10), event(1, t_ps=20), event(0, t_ps=30)]
    events = parse_events(as_lines(docs))
    assert len(events) == 3
    assert [e.window_id for e in events] == [0, 1, 0]
    assert events[0] == EventRecord(0, (0, 0, 0, 0), 10, WIN)


def test_parse_reports_line_number():
    lines = [json.dumps(event(0)), "{not json"]
    with pytest.raises(ValueError, match="line 2"):
        parse_events(lines)


def test_parse_rejects_inconsistent_window_input():
    docs = [event(7, input=(0, 0, 0, 0)), event(7, input=(1, 1, 0, 0), t_ps=5)]
    with pytest.raises(ValueError, match="window 7"):
        parse_events(as_lines(docs))


def test_parse_rejects_decreasing_timestamps():
    docs = [event(3, t_ps=100), event(3, t_ps=50)]
    with pytest.raises(ValueError, match="window 3"):
        parse_events(as_lines(docs))


@pytest.mark.parametrize(
    "doc",
    [
        {"window_id": -1, "input": [0, 0, 0, 0], "t_ps": 0, "outcomes": list(WIN)},
        {"window_id": 0, "input": [0, 0, 2, 0], "t_ps": 0, "outcomes": list(WIN)},
        {"window_id": 0, "input": [0, 0, 0, 0], "t_ps": -5, "outcomes": list(WIN)},
        {"window_id": 0, "input": [0, 0, 0, 0], "t_ps": 0, "outcomes": [0, 1, 1, 1]},
        {"window_id": 0, "input": [0, 0, 0], "t_ps": 0, "outcomes": list(WIN)},
        {"window_id": 0, "t_ps": 0, "outcomes": list(WIN)},
    ],
)
def test_parse_rejects_bad_fields(doc):
    with pytest.raises(ValueError, match="line 1"):
        parse_events([json.dumps(doc)])


def test_strict_select_identity_for_single_event_windows():
    docs = [event(i, t_ps=i) for i in range(5)]
    rounds, skipped = strict_select(parse_events(as_lines(docs)), MERMIN_GAME, seed=0)
    assert skipped == 0
    assert [r.window_id for r in rounds] == list(range(5))
    assert all(r.won for r in rounds)


def test_strict_select_uniform_over_window_events():
    """Each of k events is selected with probability 1/k across seeds."""
    k = 4
    docs = [event(0, t_ps=t, outcomes=WIN if t == 0 else LOSE) for t in range(k)]
    events = parse_events(as_lines(docs))
    # distinct t_ps identify the chosen event through the win flag pattern
    docs = [event(0, t_ps=t, outcomes=[(-1) ** t, 1, 1, 1]) for t in range(k)]
    events = parse_events(as_lines(docs))
    wins = 0
    reps = 10_000
    for seed in range(reps):
        rounds, _ = strict_select(events, MERMIN_GAME, seed=seed)
        wins += rounds[0].won
    sigma = math.sqrt(reps * 0.5 * 0.5)
    assert abs(wins - reps / 2) < 3 * sigma  # two of four events win


def test_strict_pass_rate_binomial():
    """Synthetic windows with win probability 0.975 reproduce it in strict mode."""
    rng = np.random.default_rng(41)
    n = 4000
    docs = []
    for w in range(n):
        won = rng.random() < 0.975
        docs.append(event(w, t_ps=w, outcomes=WIN if won else LOSE))
    rounds, _ = strict_select(parse_events(as_lines(docs)), MERMIN_GAME, seed=1)
    rate = sum(r.won for r in rounds) / n
    sigma = math.sqrt(0.975 * 0.025 / n)
    assert abs(rate - 0.975) < 3 * sigma


def test_decomposed_keeps_every_event_and_shuffles():
    docs = [event(w, t_ps=w + k, outcomes=WIN if k == 0 else LOSE)
            for w in range(50) for k in range(3)]
    events = parse_events(as_lines(docs))
    rounds = decomposed(events, MERMIN_GAME, seed=7)
    assert len(rounds) == 150
    assert sum(r.won for r in rounds) == 50
    again = decomposed(events, MERMIN_GAME, seed=7)
    assert rounds == again
    other = decomposed(events, MERMIN_GAME, seed=8)
    assert [r.window_id for r in other] != [r.window_id for r in rounds]
    # pass rate is permutation invariant by construction
    assert sum(r.won for r in other) == 50


def test_strict_and_decomposed_agree_on_iid_data():
    rng = np.random.default_rng(42)
    docs = []
    for w in range(2000):
        for k in range(3):
            won = rng.random() < 0.9
            docs.append(event(w, t_ps=3 * w + k, outcomes=WIN if won else LOSE))
    events = parse_events(as_lines(docs))
    strict_rounds, _ = strict_select(events, MERMIN_GAME, seed=2)
    dec_rounds = decomposed(events, MERMIN_GAME, seed=2)
    p_strict = sum(r.won for r in strict_rounds) / len(strict_rounds)
    p_dec = sum(r.won for r in dec_rounds) / len(dec_rounds)
    sigma = math.sqrt(0.9 * 0.1 / 2000)
    assert abs(p_strict - p_dec) < 3 * sigma


def test_scoring_posterior_for_ambiguous_inputs():
    """Subset-term functionals can match several terms; scoring still works."""
    game = to_game(baccari_functional())
    # input (0,1,1,0) is consistent with both A0B1 and A0C1
    docs = [event(0, input=(0, 1, 1, 0), outcomes=(1, 1, -1, 1))]
    rounds, _ = strict_select(parse_events(as_lines(docs)), game, seed=3)
    assert isinstance(rounds[0].won, bool)


def test_scoring_rejects_impossible_input():
    # odd-parity inputs never occur in the Mermin game
    docs = [event(0, input=(1, 0, 0, 0))]
    with pytest.raises(ValueError, match="matches no term"):
        strict_select(parse_events(as_lines(docs)), MERMIN_GAME, seed=0)


def test_hold_out_uniform_over_two_rounds():
    docs = [event(0, t_ps=0), event(1, t_ps=1)]
    rounds, _ = strict_select(parse_events(as_lines(docs)), MERMIN_GAME, seed=0)
    first = 0
    reps = 2000
    for seed in range(reps):
        held, rest = hold_out(rounds, rng_for(seed, 0, TAG_HOLDOUT))
        assert len(rest) == 1
        first += held == 0
    sigma = math.sqrt(reps * 0.25)
    assert abs(first - reps / 2) < 3 * sigma


def test_hold_out_deterministic():
    docs = [event(i, t_ps=i) for i in range(10)]
    rounds, _ = strict_select(parse_events(as_lines(docs)), MERMIN_GAME, seed=0)
    a = hold_out(rounds, rng_for(4, 0, TAG_HOLDOUT))
    b = hold_out(rounds, rng_for(4, 0, TAG_HOLDOUT))
    assert a == b


def test_replay_single_round_infeasible():
    _, game, bound = operator_context("mermin")
    events = parse_events(as_lines([event(0)]))
    result = replay(events, game, bound, mode="strict", delta=0.01, seed=0)
    assert not result["feasible"] and result["n"] == 1


def test_replay_unknown_mode():
    _, game, bound = operator_context("mermin")
    with pytest.raises(ValueError):
        replay([], game, bound, mode="loose")


def test_replay_is_pure_function_of_inputs():
    _, game, bound = operator_context("mermin")
    transcript, _ = run_protocol(IIDNoisy(0.05), game, n_rounds=400, n_cert=1, seed=60)
    text = events_to_jsonl(events_from_transcript(transcript))
    r1 = replay(parse_events(text.splitlines()), game, bound, mode="strict", delta=0.01, seed=5)
    r2 = replay(parse_events(text.splitlines()), game, bound, mode="strict", delta=0.01, seed=5)
    assert r1 == r2
    r3 = replay(parse_events(text.splitlines()), game, bound, mode="decomposed",
                delta=0.01, seed=5)
    assert r3["n"] == r1["n"]  # one event per window


def test_events_from_transcript_round_trip():
    """Pass rates survive the transcript -> file -> replay path."""
    _, game, bound = operator_context("mermin")
    transcript, _ = run_protocol(IIDNoisy(0.05), game, n_rounds=2001, n_cert=1, seed=61)
    events = events_from_transcript(transcript)
    assert len(events) == 2000
    assert all(e.t_ps == i * 15_000_000_000_000 for i, e in enumerate(events))
    text = events_to_jsonl(events)
    parsed = parse_events(text.splitlines())
    assert parsed == events
    result = replay(parsed, game, bound, mode="strict", delta=0.01, seed=6)
    # strict mode with one event per window replays the transcript minus one holdout
    assert abs(result["pass_rate"] - transcript.pass_rate) < 2.0 / 2000
    # replay's query consumes the identical pass-rate float
    assert result["n_win"] / (result["n"] - 1) == result["pass_rate"]
