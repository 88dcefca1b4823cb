"""Command line interface: serve the platform, simulate sessions, analyze logs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .analysis import da_type_map_from_corpus, interaction_stats
from .harness import POLICY_PAIRS, generate_corpus
from .logstore import load_corpus, verify_token
from .report import write_report
from .scenario import load_scenario_file
from .service import ServiceConfig, WozService
from .session import RewardConfig

DEFAULT_SCENARIO = Path(__file__).resolve().parents[2] / "scenarios" / "emergency.yaml"


def _service_config_from_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f) or {}
    if not isinstance(doc, dict):
        raise SystemExit(f"config file {path} must be a YAML mapping")
    return doc


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve

    doc = _service_config_from_file(args.config)
    scenario_path = args.scenario or doc.get("scenario") or str(DEFAULT_SCENARIO)
    scenario = load_scenario_file(scenario_path, strict=args.strict)
    for w in scenario.warnings:
        print(f"warning: {w}", file=sys.stderr)

    reward = RewardConfig(**doc.get("reward", {}))
    config = ServiceConfig(
        log_dir=args.log_dir or doc.get("log_dir", "logs"),
        lobby_timeout_s=float(doc.get("lobby_timeout_s", 300)),
        role_assignment=doc.get("role_assignment", "queue"),
        instruction_min_s=float(doc.get("instruction_min_s", 30)),
        disconnect_grace_s=float(doc.get("disconnect_grace_s", 30)),
        heartbeat_s=float(doc.get("heartbeat_s", 10)),
        reward=reward,
        admin_token=doc.get("admin_token", ""),
    )
    service = WozService(scenario, config)
    assets_dir = Path(scenario_path).parent / "assets"
    frontend = doc.get("frontend_dir")
    print(f"serving scenario '{scenario.name}' on {args.host}:{args.port}")
    serve(
        service,
        host=args.host,
        port=args.port,
        assets_dir=assets_dir if assets_dir.is_dir() else None,
        frontend_dir=frontend,
    )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    policies = tuple(p.strip() for p in args.policies.split(",") if p.strip())
    unknown = [p for p in policies if p not in POLICY_PAIRS]
    if unknown:
        raise SystemExit(f"unknown policies {unknown}; known: {sorted(POLICY_PAIRS)}")
    results = generate_corpus(
        n=args.n,
        seed=args.seed,
        out_dir=args.out,
        scenario_path=args.scenario or str(DEFAULT_SCENARIO),
        policy_mix=policies,
    )
    resolved = sum(1 for r in results if r.outcome["resolved"])
    print(f"ran {len(results)} sessions into {args.out}")
    print(f"resolved: {resolved}/{len(results)}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.log_dir)
    for path, reason in corpus.skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    if not corpus.logs:
        raise SystemExit(f"no loadable dialogue logs under {args.log_dir}")

    if args.scenario:
        scenario = load_scenario_file(args.scenario)
        da_map = {k: v.value for k, v in scenario.graph.da_type_map.items()}
        baseline = scenario.baseline
    else:
        da_map = da_type_map_from_corpus(corpus)
        baseline = None

    fmt = "markdown" if args.report == "md" else "csv"
    written = write_report(
        corpus,
        args.out,
        da_map,
        fmt=fmt,
        sample_sd=args.sample,
        top_k=args.top_k,
        baseline=baseline,
    )
    if args.split == "resolved":
        stats = interaction_stats(corpus, sample_sd=args.sample)
        lines = ["feature,resolved_mean,resolved_sd,not_resolved_mean,not_resolved_sd"]
        for label, field in (
            ("Number of Turns", "turns"),
            ("Number of Operator Turns", "operator_turns"),
            ("Number of Wizard Turns", "wizard_turns"),
            ("Operator Turn Length (words)", "operator_turn_len_mean"),
            ("Wizard % typed Utterances", "typed_fraction"),
            ("Duration (s)", "duration_s"),
        ):
            yes = stats.field_aggregate(field, resolved=True)
            no = stats.field_aggregate(field, resolved=False)
            scale = 100.0 if field == "typed_fraction" else 1.0
            lines.append(
                f"{label},{yes.mean * scale:.2f},{yes.sd * scale:.2f},"
                f"{no.mean * scale:.2f},{no.sd * scale:.2f}"
            )
        split_path = Path(args.out) / "table2_split.csv"
        split_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["table2_split.csv"] = split_path

    print(f"analyzed {len(corpus.logs)} dialogues ({len(corpus.skipped)} skipped)")
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return 0


def cmd_verify_token(args: argparse.Namespace) -> int:
    session = verify_token(args.log_dir, args.token)
    if session is None:
        print("NOT FOUND")
        return 1
    print(json.dumps({"token": args.token, "session": session}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wozlab",
        description="Wizard-of-Oz dialogue collection platform: server, "
        "scripted simulation and corpus analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the interaction server")
    p.add_argument("--config", help="service config YAML")
    p.add_argument("--scenario", help="scenario YAML path")
    p.add_argument("--log-dir", help="directory for session logs")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--strict", action="store_true", help="scenario warnings become errors")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run scripted sessions into a corpus")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--policies", default="random", help="comma list: golden,random,idle,stubborn")
    p.add_argument("--out", default="corpus", help="output log directory")
    p.add_argument("--scenario", help="scenario YAML path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="reproduce the corpus analysis tables")
    p.add_argument("log_dir", help="directory of finalized session logs")
    p.add_argument("--report", choices=("md", "csv"), default="md")
    p.add_argument("--out", default="analysis", help="output directory")
    p.add_argument("--sample", action="store_true", help="sample (n-1) SD instead of population")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--split", choices=("resolved",), help="also split stats by task success")
    p.add_argument("--scenario", help="scenario YAML for the act-type mapping")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify-token", help="look up the session for a completion token")
    p.add_argument("log_dir")
    p.add_argument("token")
    p.set_defaults(func=cmd_verify_token)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
