#!/usr/bin/env python3
"""Generate a desk-scale corpus with mixed agent policies, then run the full
analysis pipeline over it: interaction features, dialogue-act type shares,
success correlations, survey statistics with rank tests, report emission.

    python3 demos/02_corpus_analysis.py
"""

import tempfile
from pathlib import Path

from wozlab.analysis import (
    da_frequency,
    da_type_distribution,
    interaction_stats,
    success_correlation,
    survey_stats,
)
from wozlab.harness import generate_corpus
from wozlab.logstore import load_corpus
from wozlab.report import write_report
from wozlab.scenario import load_scenario_file

scenario = load_scenario_file("scenarios/emergency.yaml")

with tempfile.TemporaryDirectory() as tmp:
    corpus_dir = Path(tmp) / "corpus"
    print("running 30 scripted sessions (virtual clock)...")
    generate_corpus(
        30, seed=42, out_dir=corpus_dir, scenario=scenario,
        policy_mix=("golden", "random", "random", "idle"),
    )

    corpus = load_corpus(corpus_dir)
    print(f"loaded {len(corpus.logs)} dialogues, {len(corpus.skipped)} skipped\n")

    stats = interaction_stats(corpus)
    print(f"dialogues: {stats.n}, success rate {stats.success_rate():.1%}")
    for label, field in [
        ("turns", "turns"),
        ("operator turns", "operator_turns"),
        ("wizard turns", "wizard_turns"),
        ("operator turn length (words)", "operator_turn_len_mean"),
    ]:
        agg = stats.field_aggregate(field)
        print(f"  {label:30} {agg.mean:6.2f} (SD {agg.sd:.2f})")

    mapping = {k: v.value for k, v in scenario.graph.da_type_map.items()}
    dist = da_type_distribution(corpus, mapping)
    print("\ndialogue-act type shares:")
    for da_type, pct in dist.items():
        print(f"  {da_type:12} {pct:6.2f}%")

    print("\ntop-5 dialogue acts:")
    for act, count in da_frequency(corpus, top_k=5):
        print(f"  {act:32} {count}")

    r = success_correlation(stats, "action")
    print(f"\ncorrelation(action-type acts, task success) = {r:.3f}")

    print("\nsurvey ratings (mean, split by task success):")
    for q in survey_stats(corpus):
        star = " *" if q.significant else ""
        print(
            f"  {q.question}: all {q.overall.mean:.2f} | "
            f"not resolved {q.not_resolved.mean:.2f} | "
            f"resolved {q.resolved.mean:.2f}{star}"
        )

    out = Path(tmp) / "analysis"
    written = write_report(corpus, out, mapping, baseline=scenario.baseline)
    print(f"\nreport files: {', '.join(sorted(written))}")
    print("\n--- report.md preview ---")
    print((out / "report.md").read_text()[:800])
