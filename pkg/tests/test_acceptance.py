"""Acceptance suite.

One test per acceptance criterion, each printing a single
``[ACCEPTANCE] <name>: PASS`` line (run with ``pytest -s`` to watch them).
Tolerances are pinned here, not deferred.
"""

import functools
import json
import random
import time
from collections import Counter
from pathlib import Path

import pytest

from conftest import make_fuzzed_log
from wozlab.harness import (
    GoldenOperator,
    GoldenWizard,
    IdlePolicy,
    RandomOperator,
    RandomValidWizard,
    StubbornOperator,
    generate_corpus,
    replay_validate,
    run_session,
)
from wozlab.logstore import load_corpus, load_log, write_log_file
from wozlab.session import compute_reward_cents, generate_token
from wozlab.stats import mann_whitney_u, point_biserial_r, rankdata_midranks
from wozlab import fsm

FIXTURES = Path(__file__).parent / "fixtures"


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            started = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS ({time.monotonic() - started:.1f}s)")
        return wrapper
    return deco


# --------------------------------------------------------------------------
# 1. Reward tiers


@criterion("reward tiers")
def test_reward_tiers():
    started = time.monotonic()
    # The three published anchors.
    assert compute_reward_cents(360, resolved=True) == 160
    assert compute_reward_cents(360, resolved=False) == 140
    assert compute_reward_cents(0, resolved=False) == 50

    # Spreadsheet oracle: base 50 + 15 per whole minute (cap 6) + 20 bonus.
    sheet = {
        (0, False): 50, (1, False): 65, (2, False): 80, (3, False): 95,
        (4, False): 110, (5, False): 125, (6, False): 140,
        (0, True): 70, (1, True): 85, (2, True): 100, (3, True): 115,
        (4, True): 130, (5, True): 145, (6, True): 160,
    }
    for tenth in range(0, 3601):  # sweep 0..360 s in 0.1 s steps
        duration = tenth / 10
        minutes = min(int(duration // 60), 6)
        for resolved in (False, True):
            assert compute_reward_cents(duration, resolved) == sheet[(minutes, resolved)]
    assert time.monotonic() - started < 1.0


# --------------------------------------------------------------------------
# 2. FSM gating soundness (10,000 protocol-level RandomValid steps)


@criterion("fsm gating soundness")
def test_fsm_gating_soundness(scenario, tmp_path):
    started = time.monotonic()
    runs = []
    steps = 0
    seed = 0
    while steps < 10_000:
        r = run_session(
            scenario,
            RandomOperator(think_range=(3.0, 10.0)),
            RandomValidWizard(think_range=(0.5, 3.0)),
            tmp_path,
            seed=7000 + seed,
        )
        runs.append(r)
        steps += sum(1 for e in r.log["events"] if e["kind"] == "wizard_option")
        seed += 1
    assert steps >= 10_000

    for r in runs:
        # Zero rejections: agents submit only advertised options.
        codes = [n.get("code") for n in r.wizard.error_notices()]
        assert "ActionUnavailable" not in codes, codes
        # Zero state-invariant violations in the recorded world snapshots.
        for e in r.log["events"]:
            if e["kind"] == "world_command":
                robots = e["world_snapshot"]["robots"]
                busy = sum(1 for s in robots.values() if s["status"] != "idle")
                assert busy <= 1
        # Replaying the log re-validates every transition.
        replay_validate(scenario, r.log)
    assert time.monotonic() - started < 30.0


# --------------------------------------------------------------------------
# 3. Lock semantics


@criterion("lock semantics")
def test_lock_semantics(scenario):
    from hypothesis import given, settings, strategies as st

    graph = scenario.graph
    locked_states = [sid for sid, s in graph.states.items() if s.lock is not None]
    assert locked_states  # the reference scenario exercises the mechanism

    @settings(max_examples=300, deadline=None)
    @given(
        state=st.sampled_from(locked_states),
        texts=st.lists(st.text(min_size=1, max_size=20).filter(str.strip), max_size=10),
    )
    def prop(state, texts):
        pos = fsm.FsmPosition(state, lock_active=True, pending_authorization="x")
        for text in texts:
            pos = fsm.record_free_text(pos, text).new_position
            assert pos.current_state == state
            assert pos.lock_active
        # The configured operator event always unlocks.
        unlocked = fsm.clear_lock(pos)
        assert not unlocked.lock_active
        assert unlocked.current_state == state

    prop()


# --------------------------------------------------------------------------
# 4. Single active robot


@criterion("single-active-robot")
def test_single_active_robot(scenario):
    from wozlab.errors import (
        AfterDeadline, CapabilityMismatch, ConfigError, NotAtLocation, RobotBusy,
    )
    from wozlab.world import Capability, MOVE_ACTION, RobotStatus, WorldState

    actions = [MOVE_ACTION] + [c.value for c in Capability]
    for seed in range(1000):
        rng = random.Random(seed)
        world = WorldState(scenario.world, start=0.0)
        now = 0.0
        for _ in range(60):
            if rng.random() < 0.5:
                now += rng.choice([0.5, 1.0, 5.0, 11.0, 30.0])
                world.tick(now)
            else:
                try:
                    world.start_robot_action(
                        rng.choice(list(world.robots)),
                        rng.choice(actions),
                        rng.choice(list(scenario.world.locations)),
                        now,
                    )
                except (RobotBusy, CapabilityMismatch, NotAtLocation,
                        AfterDeadline, ConfigError):
                    pass
            busy = sum(
                1 for r in world.robots.values() if r.status is not RobotStatus.IDLE
            )
            assert busy <= 1, f"seed {seed}: {busy} robots active"


# --------------------------------------------------------------------------
# 5. Deadline totality


@criterion("deadline totality")
def test_deadline_totality(scenario, tmp_path):
    pairs = [
        (GoldenOperator(), GoldenWizard()),
        (RandomOperator(), RandomValidWizard()),
        (RandomOperator(), IdlePolicy()),
        (StubbornOperator(), GoldenWizard(strict=False)),
        (RandomOperator(), RandomValidWizard()),
    ]
    for seed, (op, wiz) in enumerate(pairs):
        r = run_session(scenario, op, wiz, tmp_path / str(seed), seed=100 + seed)
        outcome = r.outcome
        assert outcome["duration_played_s"] <= 360.0
        resolved = outcome["progress"]["resolved"]
        evacuated = outcome["progress"]["evacuated"]
        assert resolved != evacuated, outcome  # exactly one by the deadline
        evacuations = [
            e for e in r.log["events"]
            if e["kind"] == "milestone" and e["event_kind"] == "evacuation"
        ]
        assert len(evacuations) == (0 if resolved else 1)


# --------------------------------------------------------------------------
# 6. Golden-path regression


@criterion("golden-path regression")
def test_golden_path_regression(scenario, tmp_path):
    started = time.monotonic()
    r = run_session(scenario, GoldenOperator(), GoldenWizard(), tmp_path, seed=0)

    assert r.outcome["reason"] == "completed"
    assert r.outcome["progress"]["located"] is True
    assert r.outcome["progress"]["resolved"] is True
    assert r.outcome["reward_cents"] == 160

    # The rendered transcript matches the frozen fixture line for line.
    transcript = []
    for e in r.log["events"]:
        if e["kind"] in ("chat", "wizard_option", "wizard_free_text") and e.get("text"):
            transcript.append({
                "t": round(e["ts"] - r.log["started_at"] - 30.0, 1),
                "actor": e["actor"],
                "dialogue_act": e.get("dialogue_act"),
                "text": e["text"],
            })
        elif e["kind"] == "milestone":
            transcript.append({
                "t": round(e["ts"] - r.log["started_at"] - 30.0, 1),
                "actor": "system",
                "event": e["event_id"],
                "narration": e["narration"],
            })
    fixture = json.loads((FIXTURES / "golden_transcript.json").read_text())
    assert transcript == fixture

    texts = [e.get("text") for e in transcript]
    assert "The estimated time of arrival is 9 seconds" in texts
    assert "Moving quad copter 1 to processing module east tower" in texts
    assert "There is still 3:08 before evacuation" in texts
    assert any(
        t and t.startswith("Emergency alarm went off") and "4:56" in t for t in texts
    )
    assert time.monotonic() - started < 5.0


# --------------------------------------------------------------------------
# 7. Statistics oracle


@criterion("statistics oracle")
def test_statistics_oracle():
    from itertools import combinations

    def brute_force(a, b, alternative):
        pool = list(a) + list(b)
        n1 = len(a)
        def u_of(av, bv):
            return sum(1 for x in av for y in bv if x > y)
        u_obs = u_of(a, b)
        total = favorable = 0
        for idx in combinations(range(len(pool)), n1):
            chosen = set(idx)
            av = [pool[i] for i in idx]
            bv = [pool[i] for i in range(len(pool)) if i not in chosen]
            total += 1
            u = u_of(av, bv)
            favorable += (u >= u_obs) if alternative == "greater" else (u <= u_obs)
        return favorable / total

    # Exact mode vs brute force for every pair with min(n, m) <= 6.
    rng = random.Random(1)
    for n1 in range(1, 7):
        for n2 in range(1, 9):
            for _ in range(2):
                vals = rng.sample(range(10_000), n1 + n2)
                a, b = vals[:n1], vals[n1:]
                for alt in ("greater", "less"):
                    result = mann_whitney_u(a, b, alternative=alt)
                    assert result.method == "exact"
                    assert result.p == pytest.approx(
                        brute_force(a, b, alt), abs=1e-12
                    )

    # Approximate mode vs an independent reference implementation.
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = random.Random(2)
    for _ in range(100):
        n1, n2 = rng.randint(9, 80), rng.randint(9, 80)
        a = [rng.randint(1, 7) for _ in range(n1)]
        b = [rng.randint(1, 7) for _ in range(n2)]
        alt = rng.choice(["greater", "less"])
        mine = mann_whitney_u(a, b, alternative=alt)
        ref = scipy_stats.mannwhitneyu(
            a, b, alternative=alt, method="asymptotic", use_continuity=True
        )
        assert mine.method == "normal"
        assert mine.p == pytest.approx(ref.pvalue, abs=1e-3)

    # Point-biserial vs the closed two-group form on 20 fixed cases.
    import math
    def closed_form(x, y):
        n = len(x)
        g1 = [xi for xi, yi in zip(x, y) if yi == 1]
        g0 = [xi for xi, yi in zip(x, y) if yi == 0]
        mx = sum(x) / n
        s = math.sqrt(sum((xi - mx) ** 2 for xi in x) / n)
        return (sum(g1) / len(g1) - sum(g0) / len(g0)) / s * math.sqrt(
            len(g1) * len(g0) / n**2
        )

    rng = random.Random(3)
    checked = 0
    while checked < 20:
        n = rng.randint(4, 60)
        x = [round(rng.uniform(0, 30), 4) for _ in range(n)]
        y = [rng.randint(0, 1) for _ in range(n)]
        if len(set(y)) < 2 or len(set(x)) < 2:
            continue
        assert point_biserial_r(x, y) == pytest.approx(closed_form(x, y), abs=1e-9)
        checked += 1


# --------------------------------------------------------------------------
# 8. Analysis pipeline end to end


ANALYSIS_SEED = 20200301
ANALYSIS_MIX = ("golden", "random", "random", "idle", "stubborn")


@pytest.fixture(scope="module")
def analysis_corpus(scenario, tmp_path_factory):
    out = tmp_path_factory.mktemp("analysis")
    generate_corpus(50, seed=ANALYSIS_SEED, out_dir=out, scenario=scenario,
                    policy_mix=ANALYSIS_MIX)
    return out


@criterion("analysis pipeline end-to-end")
def test_analysis_pipeline(scenario, analysis_corpus, tmp_path):
    from wozlab.analysis import da_type_distribution, interaction_stats
    from wozlab.report import write_report

    corpus = load_corpus(analysis_corpus)
    assert len(corpus.logs) == 50
    assert corpus.skipped == []

    # Independent recomputation straight off the raw JSON files, sharing no
    # code with the analysis module.
    raw_turns = {}
    raw_typed = {}
    raw_type_counts = Counter()
    for path in sorted(analysis_corpus.rglob("*.json")):
        doc = json.loads(path.read_text())
        op = sum(
            1 for e in doc["events"]
            if e["kind"] == "chat" and e["actor"] == "operator"
        )
        wiz_msgs = [
            e for e in doc["events"]
            if e["kind"] in ("wizard_option", "wizard_free_text")
            and e.get("text") is not None
        ]
        typed = sum(1 for e in wiz_msgs if e["typed"])
        raw_turns[doc["session_id"]] = (op, len(wiz_msgs))
        raw_typed[doc["session_id"]] = typed / len(wiz_msgs) if wiz_msgs else 0.0
        for e in doc["events"]:
            if e["kind"] == "wizard_option":
                raw_type_counts[e["da_type"]] += 1

    stats = interaction_stats(corpus)
    for record in stats.records:
        op, wiz = raw_turns[record.session_id]
        assert record.operator_turns == op
        assert record.wizard_turns == wiz
        assert record.turns == op + wiz
        assert record.typed_fraction == pytest.approx(
            raw_typed[record.session_id], abs=5e-7  # metrics stored at 1e-6
        )

    mapping = {k: v.value for k, v in scenario.graph.da_type_map.items()}
    dist = da_type_distribution(corpus, mapping)
    total = sum(raw_type_counts.values())
    for t in ("request", "interaction", "action", "update"):
        assert dist[t] == pytest.approx(100.0 * raw_type_counts.get(t, 0) / total)
    assert sum(dist.values()) == pytest.approx(100.0, abs=0.01)

    # Report output is byte-deterministic across runs.
    a, b = tmp_path / "a", tmp_path / "b"
    write_report(corpus, a, mapping, baseline=scenario.baseline)
    write_report(corpus, b, mapping, baseline=scenario.baseline)
    for name in ("report.md", "table2.csv", "table3.csv", "table4.csv", "da_freq.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


# --------------------------------------------------------------------------
# 9. Log round trip


@criterion("log round-trip")
def test_log_round_trip(tmp_path):
    rng = random.Random(99)
    mismatches = 0
    for i in range(1000):
        doc = make_fuzzed_log(rng, f"s-{i:04d}")
        path = tmp_path / f"s-{i:04d}.json"
        write_log_file(path, doc)
        loaded = load_log(path)  # raises if embedded metrics != recomputation
        if loaded.doc != doc:
            mismatches += 1
    assert mismatches == 0


# --------------------------------------------------------------------------
# 10. Token uniqueness


@criterion("token uniqueness")
def test_token_uniqueness():
    n = 1_000_000
    tokens = set()
    for _ in range(n):
        tokens.add(generate_token())
    assert len(tokens) == n
