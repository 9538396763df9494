"""Command line entry points.

    occauth run <config> --out <dir> [--seed N]
    occauth export-dataset <config> --out <dir> [--seed N]
    occauth attack <config> --profile <name> --out <dir> [--seed N]
    occauth decode-clips <clips_dir> --out <csv> [--backend]

``--seed`` overrides the config's master_seed.  decode-clips re-runs the
classical decoder over an exported clip dataset and writes one CSV row per
clip, which downstream model evaluations use as the agreement reference.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import _kernels
from .clips import read_clip_trace
from .reference_decoder import decode
from .scenario import ATTACK_PROFILES, export_dataset, load_config, run_scenario

DECODE_CSV_HEADER = "clip,class,decoded_code,score,alignment_s"


def _load(args) -> "ScenarioConfig":
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_scenario(cfg, out_dir=args.out)
    print(f"{cfg.name}: {len(report.trial_rows)} trial rows -> {args.out}")
    for row in report.aggregate_rows[:4]:
        print("  " + row)
    return 0


def cmd_attack(args) -> int:
    cfg = _load(args)
    cfg = replace(cfg, attack_profile=args.profile)
    report = run_scenario(cfg, out_dir=args.out)
    if report.campaign is not None:
        print(report.campaign.csv_row())
    else:
        print(f"{cfg.name}: obstruction scenes written to {args.out}")
    return 0


def cmd_export_dataset(args) -> int:
    cfg = _load(args)
    if args.count is not None:
        cfg = replace(cfg, export_count_per_class=args.count)
    written = export_dataset(cfg, args.out)
    print(f"wrote {len(written)} clips under {Path(args.out) / 'clips'}")
    return 0


def cmd_decode_clips(args) -> int:
    root = Path(args.clips)
    manifests = sorted(root.rglob("manifest.txt"))
    if not manifests:
        print(f"no clips under {root}", file=sys.stderr)
        return 1
    lines = [DECODE_CSV_HEADER]
    for manifest_path in manifests:
        clip_dir = manifest_path.parent
        trace, manifest = read_clip_trace(clip_dir)
        result = decode(trace, float(manifest["t_f"]),
                        mirror_view=manifest.get("mirror_view", "false") == "true")
        rel = clip_dir.relative_to(root)
        lines.append(f"{rel},{manifest['class']},{result.to_csv_row()}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"decoded {len(lines) - 1} clips -> {out}")
    return 0


def cmd_backend(args) -> int:
    print(f"kernel backend: {_kernels.BACKEND}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="occauth",
                                     description="Optical challenge-response authentication testbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo scenario")
    p_run.add_argument("config")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_attack = sub.add_parser("attack", help="run an attack campaign")
    p_attack.add_argument("config")
    p_attack.add_argument("--profile", required=True, choices=ATTACK_PROFILES)
    p_attack.add_argument("--out", required=True)
    p_attack.add_argument("--seed", type=int, default=None)
    p_attack.set_defaults(func=cmd_attack)

    p_export = sub.add_parser("export-dataset", help="export synthetic clip dataset")
    p_export.add_argument("config")
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--count", type=int, default=None,
                          help="override export.count_per_class")
    p_export.add_argument("--seed", type=int, default=None)
    p_export.set_defaults(func=cmd_export_dataset)

    p_decode = sub.add_parser("decode-clips", help="decode an exported clip dataset")
    p_decode.add_argument("clips")
    p_decode.add_argument("--out", required=True)
    p_decode.set_defaults(func=cmd_decode_clips)

    p_backend = sub.add_parser("backend", help="show which kernel backend is active")
    p_backend.set_defaults(func=cmd_backend)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
