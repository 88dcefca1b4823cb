"""Corpus analytics: interaction statistics, dialogue-act distributions,
success correlations, significance tests over the post-task survey.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import EmptyCorpus, UnmappedDialogueAct
from .logstore import Corpus, LoadedLog
from .stats import (
    mann_whitney_u,
    mean,
    median,
    mode_smallest,
    point_biserial_r,
    std,
)

DA_TYPES = ("request", "interaction", "action", "update")

SIGNIFICANCE_LEVEL = 0.05


@dataclass
class DialogueRecord:
    session_id: str
    turns: int
    operator_turns: int
    wizard_turns: int
    operator_turn_len_mean: float
    typed_fraction: float
    resolved: bool
    duration_s: float
    da_type_counts: dict[str, int]
    da_counts: dict[str, int]
    questionnaire: Optional[dict] = None


@dataclass
class Aggregate:
    mean: float
    sd: float
    median: float
    mode: float
    n: int


@dataclass
class CorpusStats:
    records: list[DialogueRecord]
    sample_sd: bool = False

    @property
    def n(self) -> int:
        return len(self.records)

    def success_rate(self) -> float:
        return sum(1 for r in self.records if r.resolved) / self.n

    def aggregate(self, values: Sequence[float]) -> Aggregate:
        return Aggregate(
            mean=mean(values),
            sd=std(values, sample=self.sample_sd),
            median=median(values),
            mode=mode_smallest(values),
            n=len(values),
        )

    def field_aggregate(self, name: str, resolved: Optional[bool] = None) -> Aggregate:
        rows = self.records if resolved is None else [
            r for r in self.records if r.resolved is resolved
        ]
        if not rows:
            return Aggregate(0.0, 0.0, 0.0, 0.0, 0)
        return self.aggregate([getattr(r, name) for r in rows])


def wizard_option_events(log: LoadedLog) -> list[dict]:
    return [e for e in log.events if e.get("kind") == "wizard_option"]


def dialogue_record(log: LoadedLog) -> DialogueRecord:
    m = log.metrics
    da_counts: Counter = Counter()
    type_counts: Counter = Counter()
    for e in wizard_option_events(log):
        da_counts[e["dialogue_act"]] += 1
        if e.get("da_type"):
            type_counts[e["da_type"]] += 1
    return DialogueRecord(
        session_id=log.session_id,
        turns=m["turns_total"],
        operator_turns=m["turns_operator"],
        wizard_turns=m["turns_wizard"],
        operator_turn_len_mean=m["operator_turn_length_words"],
        typed_fraction=m["wizard_typed_fraction"],
        resolved=bool(m["resolved"]),
        duration_s=float(m["duration_s"]),
        da_type_counts=dict(type_counts),
        da_counts=dict(da_counts),
        questionnaire=log.doc.get("questionnaire"),
    )


def interaction_stats(corpus: Corpus, sample_sd: bool = False) -> CorpusStats:
    """Per-dialogue interaction features plus corpus-level aggregates."""
    if not corpus.logs:
        raise EmptyCorpus("no dialogues to analyze")
    return CorpusStats(
        records=[dialogue_record(log) for log in corpus.logs],
        sample_sd=sample_sd,
    )


def da_type_distribution(
    corpus: Corpus, da_type_map: Mapping[str, str]
) -> dict[str, float]:
    """Percentage of each dialogue-act type over all wizard predefined-option
    events. Typed free text carries no act label and is excluded."""
    if not corpus.logs:
        raise EmptyCorpus("no dialogues to analyze")
    counts: Counter = Counter()
    for log in corpus.logs:
        for e in wizard_option_events(log):
            act = e["dialogue_act"]
            if act not in da_type_map:
                raise UnmappedDialogueAct(act)
            counts[str(da_type_map[act])] += 1
    total = sum(counts.values())
    if total == 0:
        return {t: 0.0 for t in DA_TYPES}
    return {t: 100.0 * counts.get(t, 0) / total for t in DA_TYPES}


def da_frequency(corpus: Corpus, top_k: Optional[int] = None) -> list[tuple[str, int]]:
    """Dialogue acts ranked by descending count, ties broken lexicographically."""
    counts: Counter = Counter()
    for log in corpus.logs:
        for e in wizard_option_events(log):
            counts[e["dialogue_act"]] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k] if top_k else ranked


def da_type_map_from_corpus(corpus: Corpus) -> dict[str, str]:
    """Recover the act -> type mapping embedded in the logs themselves."""
    mapping: dict[str, str] = {}
    for log in corpus.logs:
        for e in wizard_option_events(log):
            if e.get("da_type"):
                mapping[e["dialogue_act"]] = e["da_type"]
    return mapping


def success_correlation(stats: CorpusStats, da_type: str) -> float:
    """Correlation between per-dialogue counts of one act type and success."""
    xs = [float(r.da_type_counts.get(da_type, 0)) for r in stats.records]
    ys = [1 if r.resolved else 0 for r in stats.records]
    return point_biserial_r(xs, ys)


@dataclass
class QuestionStats:
    question: str
    overall: Aggregate
    not_resolved: Aggregate
    resolved: Aggregate
    u: Optional[float] = None
    p: Optional[float] = None
    significant: bool = False


def survey_stats(corpus: Corpus, sample_sd: bool = False) -> list[QuestionStats]:
    """Per-question rating aggregates split by task success.

    The one-tailed rank test asks whether resolved dialogues were rated
    higher; the reported U is the not-resolved side's statistic.
    """
    stats = interaction_stats(corpus, sample_sd=sample_sd)
    answered = [r for r in stats.records if r.questionnaire]
    out: list[QuestionStats] = []
    for q in ("q1", "q2", "q3", "q4"):
        scores = [(float(r.questionnaire[q]), r.resolved) for r in answered]
        if not scores:
            continue
        all_vals = [s for s, _ in scores]
        res_vals = [s for s, ok in scores if ok]
        not_vals = [s for s, ok in scores if not ok]
        qs = QuestionStats(
            question=q,
            overall=stats.aggregate(all_vals),
            not_resolved=stats.aggregate(not_vals) if not_vals else Aggregate(0, 0, 0, 0, 0),
            resolved=stats.aggregate(res_vals) if res_vals else Aggregate(0, 0, 0, 0, 0),
        )
        if res_vals and not_vals:
            result = mann_whitney_u(res_vals, not_vals, alternative="greater")
            qs.u = result.u
            qs.p = result.p
            qs.significant = result.p < SIGNIFICANCE_LEVEL
        out.append(qs)
    return out
