"""Deterministic report emission: interaction features, act-type shares,
survey ratings, act frequency ranking. Markdown and CSV outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional

from .analysis import (
    CorpusStats,
    DA_TYPES,
    QuestionStats,
    da_frequency,
    da_type_distribution,
    interaction_stats,
    survey_stats,
)
from .logstore import Corpus

QUESTION_LABELS = {
    "q1": "Q1. Partner collaboration",
    "q2": "Q2. Information ease",
    "q3": "Q3. Task ease",
    "q4": "Q4. User expertise",
}

INTERACTION_ROWS = (
    ("Number of Turns", "turns"),
    ("Number of Operator Turns", "operator_turns"),
    ("Number of Wizard Turns", "wizard_turns"),
    ("Operator Turn Length (words)", "operator_turn_len_mean"),
    ("Wizard % typed Utterances", "typed_fraction"),
)


def _fmt(x: float, nd: int = 2) -> str:
    return f"{x:.{nd}f}"


def interaction_table_rows(stats: CorpusStats) -> list[dict]:
    rows = []
    for label, field in INTERACTION_ROWS:
        agg = stats.field_aggregate(field)
        scale = 100.0 if field == "typed_fraction" else 1.0
        rows.append(
            {
                "feature": label,
                "mean": agg.mean * scale,
                "sd": agg.sd * scale,
            }
        )
    rows.append(
        {
            "feature": "Duration (s)",
            "mean": stats.field_aggregate("duration_s").mean,
            "sd": stats.field_aggregate("duration_s").sd,
        }
    )
    rows.append(
        {"feature": "Success rate (%)", "mean": stats.success_rate() * 100.0, "sd": 0.0}
    )
    return rows


def interaction_csv(stats: CorpusStats, baseline: Optional[Mapping] = None) -> str:
    lines = ["feature,mean,sd"]
    for row in interaction_table_rows(stats):
        lines.append(f"{row['feature']},{_fmt(row['mean'])},{_fmt(row['sd'])}")
    return "\n".join(lines) + "\n"


def da_type_csv(distribution: Mapping[str, float]) -> str:
    lines = ["da_type,percent"]
    for t in DA_TYPES:
        lines.append(f"{t},{_fmt(distribution.get(t, 0.0))}")
    return "\n".join(lines) + "\n"


def survey_csv(questions: list[QuestionStats]) -> str:
    lines = [
        "question,mean,median,mode,sd,"
        "not_resolved_mean,not_resolved_median,not_resolved_mode,not_resolved_sd,"
        "resolved_mean,resolved_median,resolved_mode,resolved_sd,u,p,significant"
    ]
    for q in questions:
        cells = [QUESTION_LABELS.get(q.question, q.question)]
        for agg in (q.overall, q.not_resolved, q.resolved):
            cells += [_fmt(agg.mean), _fmt(agg.median, 1), _fmt(agg.mode, 1), _fmt(agg.sd)]
        cells += [
            _fmt(q.u, 1) if q.u is not None else "",
            f"{q.p:.6f}" if q.p is not None else "",
            "yes" if q.significant else "no",
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def da_freq_csv(ranked: list[tuple[str, int]]) -> str:
    lines = ["dialogue_act,count"]
    for act, count in ranked:
        lines.append(f"{act},{count}")
    return "\n".join(lines) + "\n"


def render_markdown(
    stats: CorpusStats,
    distribution: Mapping[str, float],
    questions: list[QuestionStats],
    ranked: list[tuple[str, int]],
    baseline: Optional[Mapping] = None,
) -> str:
    base_inter = (baseline or {}).get("interaction", {})
    base_da = (baseline or {}).get("da_type_pct", {})
    base_label = (baseline or {}).get("label", "baseline")

    out = []
    out.append("# Corpus report")
    out.append("")
    out.append(f"Dialogues: {stats.n}  ")
    resolved_n = sum(1 for r in stats.records if r.resolved)
    out.append(
        f"Resolved: {resolved_n} ({_fmt(stats.success_rate() * 100)}%), "
        f"not resolved: {stats.n - resolved_n}"
    )
    out.append("")

    out.append("## Interaction features")
    out.append("")
    base_keys = {
        "Number of Turns": ("turns_mean", "turns_sd"),
        "Number of Operator Turns": ("operator_turns_mean", "operator_turns_sd"),
        "Number of Wizard Turns": ("wizard_turns_mean", "wizard_turns_sd"),
        "Operator Turn Length (words)": ("operator_turn_len_mean", "operator_turn_len_sd"),
        "Wizard % typed Utterances": ("wizard_typed_pct_mean", "wizard_typed_pct_sd"),
    }
    if base_inter:
        out.append(f"| Feature | Mean (SD) | {base_label} Mean (SD) |")
        out.append("| --- | --- | --- |")
    else:
        out.append("| Feature | Mean (SD) |")
        out.append("| --- | --- |")
    for row in interaction_table_rows(stats):
        cell = f"{_fmt(row['mean'])} ({_fmt(row['sd'])})"
        if base_inter:
            keys = base_keys.get(row["feature"])
            if keys and keys[0] in base_inter:
                ref = f"{_fmt(float(base_inter[keys[0]]))} ({_fmt(float(base_inter[keys[1]]))})"
            else:
                ref = "-"
            out.append(f"| {row['feature']} | {cell} | {ref} |")
        else:
            out.append(f"| {row['feature']} | {cell} |")
    out.append("")

    out.append("## Dialogue act types")
    out.append("")
    if base_da:
        out.append(f"| Type | % | {base_label} % |")
        out.append("| --- | --- | --- |")
        for t in DA_TYPES:
            ref = _fmt(float(base_da[t])) if t in base_da else "-"
            out.append(f"| % {t.capitalize()} | {_fmt(distribution.get(t, 0.0))} | {ref} |")
    else:
        out.append("| Type | % |")
        out.append("| --- | --- |")
        for t in DA_TYPES:
            out.append(f"| % {t.capitalize()} | {_fmt(distribution.get(t, 0.0))} |")
    out.append("")

    if questions:
        out.append("## Post-task survey (7-point scales)")
        out.append("")
        out.append(
            "| Question | All Mean/Median/Mode (SD) | Not resolved | Resolved | U | p |"
        )
        out.append("| --- | --- | --- | --- | --- | --- |")
        for q in questions:
            def cell(agg):
                return f"{_fmt(agg.mean)}/{_fmt(agg.median, 1)}/{_fmt(agg.mode, 1)} ({_fmt(agg.sd)})"

            star = "*" if q.significant else ""
            u = _fmt(q.u, 1) if q.u is not None else "-"
            p = f"{q.p:.4f}{star}" if q.p is not None else "-"
            out.append(
                f"| {QUESTION_LABELS.get(q.question, q.question)} | {cell(q.overall)} | "
                f"{cell(q.not_resolved)} | {cell(q.resolved)} | {u} | {p} |"
            )
        out.append("")
        out.append("`*` one-tailed rank test significant at p < 0.05 (resolved rated higher).")
        out.append("")

    out.append("## Top dialogue acts")
    out.append("")
    out.append("| Rank | Dialogue act | Count |")
    out.append("| --- | --- | --- |")
    for i, (act, count) in enumerate(ranked, start=1):
        out.append(f"| {i} | {act} | {count} |")
    out.append("")
    return "\n".join(out)


def write_report(
    corpus: Corpus,
    out_dir: str | Path,
    da_type_map: Mapping[str, str],
    fmt: str = "markdown",
    sample_sd: bool = False,
    top_k: int = 10,
    baseline: Optional[Mapping] = None,
) -> dict[str, Path]:
    """Emit report files; byte-deterministic for a fixed corpus."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = interaction_stats(corpus, sample_sd=sample_sd)
    distribution = da_type_distribution(corpus, da_type_map)
    questions = survey_stats(corpus, sample_sd=sample_sd)
    ranked = da_frequency(corpus, top_k=top_k)

    written: dict[str, Path] = {}

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written[name] = path

    emit("table2.csv", interaction_csv(stats))
    emit("table3.csv", da_type_csv(distribution))
    emit("table4.csv", survey_csv(questions))
    emit("da_freq.csv", da_freq_csv(ranked))
    if fmt == "markdown":
        emit(
            "report.md",
            render_markdown(stats, distribution, questions, ranked, baseline=baseline),
        )
    return written
