"""Command-line interface.

Exit status: 0 when the command completed (whatever the verdict), 1 on I/O
or data errors, 2 on usage errors.
"""

import argparse
import json
import os
import sqlite3
import sys

from . import __version__
from .analysis import DEFAULT_ELA_AMPLIFICATION, DEFAULT_ELA_QUALITY, DEFAULT_MEDIAN_WINDOW
from .errors import ForensicsError, UnparseableImage
from .exif import TAG_NAMES, extract_editor_signature, extract_thumbnail_dqt, parse_exif
from .pipeline import AnalyzeOptions, analyze_many, build_report, render_text
from .refdb import ReferenceDb, export_db, import_db
from .scanner import build_extraction_report
from .segments import dqt_fingerprint, extract_dqt, parse_segments

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _global_options(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--db", default=default(None), help="Reference DB file (sqlite)")
    parser.add_argument("--report", choices=("text", "json"), default=default("text"))
    parser.add_argument("--out", default=default(None), help="directory for heatmap artifacts")
    parser.add_argument("--ela-quality", type=int, default=default(DEFAULT_ELA_QUALITY))
    parser.add_argument("--ela-amp", type=float, default=default(DEFAULT_ELA_AMPLIFICATION))
    parser.add_argument("--median-window", type=int, default=default(DEFAULT_MEDIAN_WINDOW))


def build_parser():
    parser = argparse.ArgumentParser(prog="imgforensics",
                                     description="Image manipulation forensics toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    # the same flags are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="run all stages on images")
    p.add_argument("images", nargs="+")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("scan", parents=[common], help="scan an Android extraction tree")
    p.add_argument("root")

    p = sub.add_parser("dqt", parents=[common], help="print quantization tables and fingerprint")
    p.add_argument("image")

    p = sub.add_parser("exif", parents=[common], help="print Exif tags")
    p.add_argument("image")

    db = sub.add_parser("db", parents=[common], help="Reference DB maintenance")
    dbsub = db.add_subparsers(dest="db_command", required=True)
    p = dbsub.add_parser("ingest", parents=[common], help="ingest a labeled directory")
    p.add_argument("directory")
    p.add_argument("--label", required=True, help="EDITOR@VERSION")
    p = dbsub.add_parser("export", parents=[common], help="write a snapshot ('-' for stdout)")
    p.add_argument("file")
    p = dbsub.add_parser("import", parents=[common], help="load a snapshot into an empty --db")
    p.add_argument("file")
    return parser


def _options(args):
    if not 1 <= args.ela_quality <= 100:
        raise UsageError("--ela-quality must be in 1..100")
    if args.ela_amp <= 0:
        raise UsageError("--ela-amp must be positive")
    if args.median_window < 3 or args.median_window % 2 == 0:
        raise UsageError("--median-window must be odd and >= 3")
    return AnalyzeOptions(ela_quality=args.ela_quality, ela_amplification=args.ela_amp,
                          median_window=args.median_window, out_dir=args.out)


def _open_db(args, readonly):
    if args.db is None:
        return ReferenceDb()
    if readonly:
        if not os.path.exists(args.db):
            raise FileNotFoundError(f"reference DB {args.db!r} does not exist")
        return ReferenceDb(args.db, readonly=True)
    return ReferenceDb(args.db)


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _emit(args, out, report):
    if args.report == "json":
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        out.write(render_text(report))


def cmd_analyze(args, out):
    options = _options(args)
    with _open_db(args, readonly=True) as db:
        verdicts = analyze_many(args.images, db, options, max_workers=args.jobs)
        report = build_report(verdicts, db=db if args.db else None, options=options)
    _emit(args, out, report)
    return EXIT_OK


def cmd_scan(args, out):
    options = _options(args)
    with _open_db(args, readonly=True) as db:
        scan = build_extraction_report(args.root, db)
        report = build_report(scan=scan, db=db if args.db else None, options=options)
    _emit(args, out, report)
    return EXIT_OK


def cmd_dqt(args, out):
    segs = parse_segments(_read(args.image))
    qts = extract_dqt(segs)
    fp = dqt_fingerprint(qts)
    if args.report == "json":
        doc = {"image": args.image, "fingerprint": fp,
               "tables": {str(t): list(q.values_natural) for t, q in sorted(qts.tables.items())}}
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    for tid, table in sorted(qts.tables.items()):
        out.write(f"table {tid} ({table.precision}-bit)\n")
        for row in table.rows():
            out.write(" ".join(f"{v:4d}" for v in row) + "\n")
    out.write(f"fingerprint {fp}\n")
    return EXIT_OK


def _tag_text(tv):
    if isinstance(tv.value, bytes):
        return tv.value[:32].hex() + ("..." if len(tv.value) > 32 else "")
    return str(tv.value)


def cmd_exif(args, out):
    payload = parse_segments(_read(args.image)).exif_payload()
    if payload is None:
        out.write("no Exif segment\n")
        return EXIT_OK
    rec = parse_exif(payload)
    sig = extract_editor_signature(rec)
    thumb = extract_thumbnail_dqt(rec)
    doc = {
        "byte_order": rec.byte_order,
        "ifd0": {TAG_NAMES.get(t, f"0x{t:04X}"): _tag_text(v) for t, v in sorted(rec.tags.items())},
        "ifd1": {TAG_NAMES.get(t, f"0x{t:04X}"): _tag_text(v) for t, v in sorted(rec.ifd1_tags.items())},
        "editor_signature": None if sig is None else {"software": sig.software, "artist": sig.artist},
        "thumbnail_bytes": None if rec.thumbnail is None else len(rec.thumbnail),
        "thumbnail_dqt_fingerprint": dqt_fingerprint(thumb) if thumb is not None else None,
        "diagnostics": rec.diagnostics,
    }
    if args.report == "json":
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    out.write(f"byte order: {doc['byte_order']}\n")
    for section in ("ifd0", "ifd1"):
        for name, value in doc[section].items():
            out.write(f"{section}.{name}: {value}\n")
    if sig is not None:
        out.write(f"editor signature: Software={sig.software!r} Artist={sig.artist!r}\n")
    if doc["thumbnail_bytes"] is not None:
        out.write(f"thumbnail: {doc['thumbnail_bytes']} bytes, DQT {doc['thumbnail_dqt_fingerprint']}\n")
    for d in rec.diagnostics:
        out.write(f"diagnostic: {d}\n")
    return EXIT_OK


def cmd_db(args, out):
    if args.db is None:
        raise UsageError("db commands need --db PATH")
    if args.db_command == "ingest":
        if "@" not in args.label or args.label.startswith("@"):
            raise UsageError("--label must look like EDITOR@VERSION")
        if not os.path.isdir(args.directory):
            raise FileNotFoundError(f"{args.directory!r} is not a directory")
        done = skipped = 0
        with ReferenceDb(args.db) as db:
            for dirpath, dirnames, filenames in os.walk(args.directory):
                dirnames.sort()
                for name in sorted(filenames):
                    path = os.path.join(dirpath, name)
                    try:
                        rec = db.ingest(_read(path), name, args.label)
                    except UnparseableImage:
                        skipped += 1
                        continue
                    done += 1
                    for d in rec.diagnostics:
                        out.write(f"{name}: {d}\n")
        out.write(f"ingested {done} file(s) as {args.label}, skipped {skipped}\n")
        return EXIT_OK
    if args.db_command == "export":
        with _open_db(args, readonly=True) as db:
            text = export_db(db)
        if args.file == "-":
            out.write(text)
        else:
            with open(args.file, "w", encoding="utf-8") as fh:
                fh.write(text)
        return EXIT_OK
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    if os.path.exists(args.db):
        with ReferenceDb(args.db) as existing:
            if any(existing.rows().values()):
                raise FileExistsError(f"reference DB {args.db!r} is not empty")
        os.remove(args.db)
    import_db(text, args.db).close()
    out.write(f"imported snapshot into {args.db}\n")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "scan": cmd_scan, "dqt": cmd_dqt, "exif": cmd_exif, "db": cmd_db}


def run_cli(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"imgforensics: usage error: {exc}\n")
        return EXIT_USAGE
    except (OSError, ForensicsError, sqlite3.Error) as exc:
        err.write(f"imgforensics: error: {type(exc).__name__}: {exc}\n")
        return EXIT_IO


def main(argv=None):
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
