"""``blocknav`` command line: document checks, the two services,
simulators, replay, and metrics.

Every flag can also come from the environment as BLOCKNAV_<FLAG> with
dashes turned into underscores (flags win over environment). Exit codes:
0 success, 1 domain failure (validation violations, replay mismatch,
unreachable relay, ...), 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import engine, recognizer, relay, service, sessionlog, simulate
from .clock import SystemClock
from .document import (
    DocumentError,
    build_block_index,
    complexity_metrics,
    load_document,
    parse_document,
    validate,
)

ENV_PREFIX = "BLOCKNAV_"

log = logging.getLogger(__name__)


def _env(flag: str) -> Optional[str]:
    return os.environ.get(ENV_PREFIX + flag.replace("-", "_").upper())


def _env_int(flag: str, fallback: int) -> int:
    raw = _env(flag)
    return int(raw) if raw is not None else fallback


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"--listen must be HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _require(value: Optional[str], parser: argparse.ArgumentParser, what: str) -> str:
    if not value:
        parser.error(f"{what} is required (flag or {ENV_PREFIX}{what.strip('-').replace('-', '_').upper()})")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocknav",
        description="Flexible-access assembly instructions: documents, navigation sessions, relay, simulators.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="lint an instruction document")
    p.add_argument("doc_pos", nargs="?", metavar="DOC")
    p.add_argument("--doc", default=_env("doc"))

    p = sub.add_parser("index", help="print the block tag index (or complexity counts)")
    p.add_argument("doc_pos", nargs="?", metavar="DOC")
    p.add_argument("--doc", default=_env("doc"))
    p.add_argument("--complexity", action="store_true",
                   help="print block/step/asymmetry counts instead of the index")
    p.add_argument("--scope", default=None, help="restrict complexity to one sub-part id")

    p = sub.add_parser("serve-relay", help="run the detection relay service")
    p.add_argument("--listen", default=_env("listen") or "127.0.0.1:8601")
    p.add_argument("--dedupe-ms", type=int, default=_env_int("dedupe-ms", relay.DEFAULT_DEDUPE_MS))
    p.add_argument("--retention-ms", type=int, default=_env_int("retention-ms", relay.DEFAULT_RETENTION_MS))

    p = sub.add_parser("serve-session", help="run the session service")
    p.add_argument("--listen", default=_env("listen") or "127.0.0.1:8600")
    p.add_argument("--relay-addr", default=_env("relay-addr"),
                   help="relay base URL to poll for detections")
    p.add_argument("--poll-ms", type=int, default=_env_int("poll-ms", service.DEFAULT_POLL_MS))
    p.add_argument("--arm-window-ms", type=int,
                   default=_env_int("arm-window-ms", engine.DEFAULT_ARM_WINDOW_MS))
    p.add_argument("--doc", default=_env("doc"),
                   help="preload this document and print its id")

    p = sub.add_parser("sim-recognizer", help="submit scripted or interactive detections")
    p.add_argument("--relay-addr", default=_env("relay-addr"))
    p.add_argument("--script", default=None, help="show-event script file")
    p.add_argument("--interactive", action="store_true",
                   help="read tag ids from stdin, one per line")
    p.add_argument("--device", default=_env("device") or "recognizer-1")
    p.add_argument("--seed", type=int, default=_env_int("seed", 0))
    p.add_argument("--miss-probability", type=float, default=0.0)
    p.add_argument("--max-range-cm", type=float, default=recognizer.DEFAULT_MAX_RANGE_CM)
    p.add_argument("--repeat-hz", type=float, default=recognizer.DEFAULT_REPEAT_HZ)

    p = sub.add_parser("sim-assembler", help="run strategy simulations over a document")
    p.add_argument("--doc", default=_env("doc"))
    p.add_argument("--profile", default=_env("profile"),
                   choices=simulate.PROFILE_KINDS, metavar="KIND")
    p.add_argument("--seed", type=int, default=_env_int("seed", 0))
    p.add_argument("--skip-probability", type=float, default=0.6)
    p.add_argument("--error-rate", type=float, default=0.15)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--out", default=None, help="write the session log here")
    p.add_argument("--batch", default=None, help="batch config file (JSON)")
    p.add_argument("--out-dir", default=None, help="directory for batch run logs")

    p = sub.add_parser("replay", help="rebuild session state from a log")
    p.add_argument("--doc", default=_env("doc"))
    p.add_argument("--log", default=_env("log"))

    p = sub.add_parser("metrics", help="count command usage in a session log")
    p.add_argument("log_pos", nargs="?", metavar="LOG")
    p.add_argument("--log", default=_env("log"))
    p.add_argument("--doc", default=_env("doc"),
                   help="document, to also report completion")

    return parser


def _cmd_validate(args, parser) -> int:
    path = _require(args.doc_pos or args.doc, parser, "--doc")
    doc = load_document(_read(path))
    report = validate(doc)
    text = report.to_text()
    if text:
        print(text)
    print(f"{len(report)} violation(s)")
    return 0 if report.ok else 1


def _cmd_index(args, parser) -> int:
    path = _require(args.doc_pos or args.doc, parser, "--doc")
    doc = parse_document(_read(path))
    if args.complexity:
        rep = complexity_metrics(doc, scope=args.scope)
        where = args.scope or "document"
        print(f"{where}\tblocks={rep.block_count}\tsteps={rep.step_count}\tasymmetric={rep.asymmetric_count}")
        return 0
    index = build_block_index(doc)
    for tag in sorted(index.entries):
        steps = ",".join(str(s) for s in index.entries[tag])
        print(f"{tag}\t{steps}")
    return 0


def _cmd_serve_relay(args) -> int:
    listen = _parse_listen(args.listen)
    store = relay.RelayStore(dedupe_ms=args.dedupe_ms)
    server = relay.make_relay_server(listen, store, retention_ms=args.retention_ms)
    print(f"relay listening on {listen[0]}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _cmd_serve_session(args) -> int:
    listen = _parse_listen(args.listen)
    relay_client = relay.RelayClient(args.relay_addr) if args.relay_addr else None
    host = service.SessionHost(
        relay=relay_client,
        poll_ms=args.poll_ms,
        arm_window_ms=args.arm_window_ms,
    )
    if args.doc:
        doc_id = host.register_document_text(_read(args.doc))
        print(f"document_id={doc_id}")
        sys.stdout.flush()
    if relay_client is not None:
        host.start_pump_thread()
    server = service.make_session_server(listen, host)
    print(f"session service listening on {listen[0]}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        host.stop()
        server.server_close()
    return 0


def _cmd_sim_recognizer(args, parser) -> int:
    addr = _require(args.relay_addr, parser, "--relay-addr")
    client = relay.RelayClient(addr)
    config = recognizer.RecognizerConfig(
        device_id=args.device,
        max_range_cm=args.max_range_cm,
        miss_probability=args.miss_probability,
        repeat_hz=args.repeat_hz,
        seed=args.seed,
    )
    if args.interactive:
        clock = SystemClock()
        for line in sys.stdin:
            tag = line.strip()
            if not tag:
                continue
            result = recognizer.interactive_show(tag, config, client, at=clock.now_ms())
            print("deduplicated" if result.deduplicated else f"seq={result.seq}")
            sys.stdout.flush()
        return 0
    if not args.script:
        parser.error("sim-recognizer needs --script or --interactive")
    script = recognizer.read_script_file(args.script)
    accepted, report = recognizer.run_script(script, config, client)
    print(f"shows={report.shows} recognized={report.recognized_shows} "
          f"submissions={report.submissions} accepted={len(accepted)} "
          f"deduplicated={report.deduplicated} out_of_range={report.out_of_range} "
          f"bad_angle={report.bad_angle} missed={report.missed}")
    return 0


def _metrics_csv_row(m: simulate.Metrics) -> str:
    values = []
    for name in simulate.FIELD_ORDER:
        v = getattr(m, name)
        values.append(str(v).lower() if isinstance(v, bool) else str(v))
    return ",".join(values)


def _cmd_sim_assembler(args, parser) -> int:
    if args.batch:
        return _run_batch(args, parser)
    doc_path = _require(args.doc, parser, "--doc")
    if not args.profile:
        parser.error("--profile is required (or use --batch)")
    doc = parse_document(_read(doc_path))
    profile = simulate.StrategyProfile(
        kind=args.profile,
        skip_probability=args.skip_probability,
        error_rate=args.error_rate,
        seed=args.seed,
    )
    result = simulate.simulate(doc, profile, budget=args.budget)
    if args.out:
        sessionlog.write_log_file(result.log, args.out)
    print(",".join(simulate.FIELD_ORDER))
    print(_metrics_csv_row(result.metrics))
    if result.budget_exhausted:
        log.warning("command budget exhausted before completion")
        print("budget_exhausted=true", file=sys.stderr)
    return 0


def _run_batch(args, parser) -> int:
    config = json.loads(_read(args.batch))
    doc = parse_document(_read(config["document"]))
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = [",".join(simulate.FIELD_ORDER)]
    run_no = 0
    for spec_entry in config.get("runs", []):
        kind = spec_entry["profile"]
        base_seed = int(spec_entry.get("seed", 0))
        reps = int(spec_entry.get("repetitions", 1))
        for rep in range(reps):
            run_no += 1
            profile = simulate.StrategyProfile(
                kind=kind,
                skip_probability=float(spec_entry.get("skip_probability", 0.6)),
                error_rate=float(spec_entry.get("error_rate", 0.15)),
                weights=spec_entry.get("weights"),
                seed=base_seed + rep,
            )
            result = simulate.simulate(doc, profile, budget=spec_entry.get("budget"))
            rows.append(_metrics_csv_row(result.metrics))
            if out_dir:
                name = f"run-{run_no:03d}-{kind}-seed{profile.seed}.log"
                sessionlog.write_log_file(result.log, str(out_dir / name))
    table = "\n".join(rows)
    print(table)
    if out_dir:
        (out_dir / "metrics.csv").write_text(table + "\n", encoding="utf-8")
    return 0


def _cmd_replay(args, parser) -> int:
    doc_path = _require(args.doc, parser, "--doc")
    log_path = _require(args.log, parser, "--log")
    doc = parse_document(_read(doc_path))
    entries = sessionlog.read_log_file(log_path)
    state = engine.replay(doc, entries)
    anchor = state.return_anchor if state.return_anchor is not None else "-"
    print(f"current_step={state.current_step} return_anchor={anchor} "
          f"visited={len(state.visited)} entries={len(state.log)}")
    return 0


def _cmd_metrics(args, parser) -> int:
    log_path = _require(args.log_pos or args.log, parser, "--log")
    entries = sessionlog.read_log_file(log_path)
    doc = parse_document(_read(args.doc)) if args.doc else None
    m = simulate.compute_metrics(entries, doc)
    print(",".join(simulate.FIELD_ORDER))
    print(_metrics_csv_row(m))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "validate":
            return _cmd_validate(args, parser)
        if args.subcommand == "index":
            return _cmd_index(args, parser)
        if args.subcommand == "serve-relay":
            return _cmd_serve_relay(args)
        if args.subcommand == "serve-session":
            return _cmd_serve_session(args)
        if args.subcommand == "sim-recognizer":
            return _cmd_sim_recognizer(args, parser)
        if args.subcommand == "sim-assembler":
            return _cmd_sim_assembler(args, parser)
        if args.subcommand == "replay":
            return _cmd_replay(args, parser)
        if args.subcommand == "metrics":
            return _cmd_metrics(args, parser)
        parser.error(f"unknown subcommand {args.subcommand!r}")
    except (DocumentError, engine.LogDocMismatch, simulate.MalformedLog,
            sessionlog.LogParseError, recognizer.ScriptParseError,
            relay.MalformedReport, relay.RelayUnreachable,
            FileNotFoundError, ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
