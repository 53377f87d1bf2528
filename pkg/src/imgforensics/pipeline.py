"""Three-stage orchestration: metadata lookup, pixel analyses, combined verdict.

Fusion rule (a toolkit convention, not a calibrated model):

* any Exif, filename-signature or DQT candidate, or an ELA region that clears
  the stage-2 bar, gives ``manipulation-indicated``;
* structural filename candidates alone, or a stage 2 that could not run,
  give ``inconclusive``;
* otherwise ``no-signal``.  Absence of evidence is never reported as
  "original".
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

from . import __version__
from .analysis import (DEFAULT_ELA_AMPLIFICATION, DEFAULT_ELA_QUALITY, DEFAULT_MEDIAN_WINDOW,
                       STAGE2_SCORE_THRESHOLD, block_verdict, ela, ela_indicates,
                       luminance_gradient, noise_analysis, pca_projection)
from .codec import decode
from .errors import AnalysisError, FileUnreadable, JpegError
from .evidence import collect_stage1

REPORT_SCHEMA_VERSION = 1
VERDICTS = ("manipulation-indicated", "inconclusive", "no-signal")
CONVENTION_NOTE = ("verdict thresholds and evidence ordering are toolkit conventions, "
                   "not calibrated detection rates")


@dataclass(frozen=True)
class AnalyzeOptions:
    ela_quality: int = DEFAULT_ELA_QUALITY
    ela_amplification: float = DEFAULT_ELA_AMPLIFICATION
    median_window: int = DEFAULT_MEDIAN_WINDOW
    pca_component: int = 1
    out_dir: str | None = None  # heatmap artifacts go here when set
    heatmap_formats: tuple = ("png",)
    run_stage2: bool = True

    def to_dict(self):
        return {"ela_quality": self.ela_quality, "ela_amplification": self.ela_amplification,
                "median_window": self.median_window, "pca_component": self.pca_component}


@dataclass
class ImageVerdict:
    target: str
    stage1: dict
    stage2: dict
    verdict: str
    rationale: list = field(default_factory=list)  # {"kind", "source", "text"}

    def to_dict(self):
        return {"target": self.target, "stage1": self.stage1, "stage2": self.stage2,
                "verdict": self.verdict, "rationale": list(self.rationale)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["target"], d["stage1"], d["stage2"], d["verdict"], list(d["rationale"]))

    def evidence(self):
        return [r for r in self.rationale if r["kind"] == "evidence"]


def _line(kind, source, text):
    return {"kind": kind, "source": source, "text": text}


def _candidate_line(c):
    if c.evidence == "exif":
        source, what = "exif", f"Exif {c.detail}"
    elif c.evidence == "dqt":
        source, what = "dqt", c.detail
    else:
        source, what = f"filename-{c.strength}", c.detail
    plural = "s" if c.sample_count != 1 else ""
    text = f"{what} matches {c.editor_name} {c.editor_version} ({c.sample_count} reference sample{plural})"
    if c.shared:
        text += "; fingerprint shared by several editors"
    return _line("evidence", source, text)


def _write_heatmap(h, target, method, options):
    paths = []
    os.makedirs(options.out_dir, exist_ok=True)
    stem = os.path.basename(target)
    for fmt in options.heatmap_formats:
        path = os.path.join(options.out_dir, f"{stem}.{method}.{fmt}")
        with open(path, "wb") as fh:
            fh.write(h.to_png() if fmt == "png" else h.to_raw())
        paths.append(path)
    return paths


def _stage2(data, target, ev, options, rationale):
    """Run the pixel analyses; returns the stage-2 dict."""
    out = {"status": "skipped", "reason": None, "analyses": {},
           "threshold": STAGE2_SCORE_THRESHOLD, "indicated": False}
    if not options.run_stage2:
        out["reason"] = "disabled by options"
        return out
    if ev.format != "JPEG":
        out["reason"] = f"{ev.format or 'unknown'} content is not decodable by the built-in codec"
        rationale.append(_line("diagnostic", "stage2", f"stage 2 skipped: {out['reason']}"))
        return out
    try:
        img = decode(data)
    except JpegError as exc:
        out["reason"] = f"{type(exc).__name__}: {exc}"
        rationale.append(_line("diagnostic", "stage2", f"stage 2 skipped: {out['reason']}"))
        return out
    out["status"] = "completed"
    runs = (
        ("ela", lambda: ela(img, options.ela_quality, options.ela_amplification)),
        ("noise", lambda: noise_analysis(img, options.median_window)),
        ("gradient", lambda: luminance_gradient(img)),
        ("pca", lambda: pca_projection(img, options.pca_component)),
    )
    for name, run in runs:
        try:
            heat = run()
        except AnalysisError as exc:
            out["analyses"][name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            rationale.append(_line("diagnostic", name, f"{name} not computed: {type(exc).__name__}: {exc}"))
            continue
        v = block_verdict(heat)
        entry = {"status": "completed", "score": v.score, "threshold_used": v.threshold_used,
                 "suspicious_pixels": int(v.suspicious_mask.sum()),
                 "mean_heat": float(heat.values.mean()), "artifacts": []}
        if name == "ela":
            entry["indicated"] = ela_indicates(v, heat, options.ela_amplification)
            out["indicated"] = entry["indicated"]
        if options.out_dir:
            entry["artifacts"] = _write_heatmap(heat, target, name, options)
        out["analyses"][name] = entry
    ela_entry = out["analyses"].get("ela", {})
    if out["indicated"]:
        rationale.append(_line("evidence", "stage2",
                               f"ELA region score {ela_entry['score']:.2f} >= {STAGE2_SCORE_THRESHOLD}"))
    return out


def decide(candidates, stage2):
    strong = [c for c in candidates if c.evidence != "filename" or c.strength == "signature"]
    if strong or stage2.get("indicated"):
        return "manipulation-indicated"
    if candidates or stage2.get("status") != "completed":
        return "inconclusive"
    return "no-signal"


def analyze_bytes(data, target, db=None, options=None, matcher=None):
    options = options or AnalyzeOptions()
    ev = collect_stage1(data, os.path.basename(target), db, matcher)
    rationale = [_candidate_line(c) for c in ev.lookup.candidates]
    for m in ev.filename_matches:
        if not any(c.evidence == "filename" and c.editor_name == m.editor_name
                   for c in ev.lookup.candidates):
            rationale.append(_line("diagnostic", "filename",
                                   f"filename fits {m.editor_name} pattern {m.pattern_name} "
                                   f"({m.strength}); editor not in the Reference DB"))
    rationale += [_line("diagnostic", "stage1", d) for d in ev.diagnostics]
    if ev.coding not in (None, "baseline", "extended"):
        rationale.append(_line("diagnostic", "stage1",
                               f"{ev.coding} JPEG: metadata analyzed, pixels not decoded"))
    stage2 = _stage2(data, target, ev, options, rationale)
    verdict = decide(ev.lookup.candidates, stage2)
    # evidence first (already in priority order), diagnostics after
    rationale.sort(key=lambda r: r["kind"] != "evidence")
    return ImageVerdict(target, ev.to_dict(), stage2, verdict, rationale)


def analyze_image(path, db=None, options=None, matcher=None):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc.strerror or exc}") from None
    return analyze_bytes(data, os.fspath(path), db, options, matcher)


def analyze_many(paths, db=None, options=None, max_workers=1):
    if max_workers <= 1:
        return [analyze_image(p, db, options) for p in paths]
    with ThreadPoolExecutor(max_workers) as pool:
        return list(pool.map(lambda p: analyze_image(p, db, options), paths))


# -- reports ---------------------------------------------------------------------------

def build_report(images=(), scan=None, db=None, options=None):
    options = options or AnalyzeOptions()
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool": {"name": "imgforensics", "version": __version__},
        "db_snapshot": db.digest() if db is not None else None,
        "options": options.to_dict(),
        "conventions": CONVENTION_NOTE,
        "images": [v.to_dict() for v in images],
        "scan": scan.to_dict() if scan is not None else None,
    }


def report_schema():
    return json.loads(resources.files("imgforensics").joinpath("data/report.schema.json")
                      .read_text("utf-8"))


def render_text(report):
    lines = [f"imgforensics {report['tool']['version']}  report schema v{report['schema_version']}",
             f"reference db: {report['db_snapshot'] or 'none'}", f"note: {report['conventions']}"]
    for img in report["images"]:
        lines += ["", f"== {img['target']}", f"verdict: {img['verdict']}"]
        for r in img["rationale"]:
            tag = "+" if r["kind"] == "evidence" else "."
            lines.append(f"  {tag} [{r['source']}] {r['text']}")
        s2 = img["stage2"]
        if s2["status"] == "completed":
            for name, a in s2["analyses"].items():
                if a["status"] == "completed":
                    extra = "".join(f"  -> {p}" for p in a["artifacts"])
                    lines.append(f"  stage2 {name}: score {a['score']:.2f}, mean heat {a['mean_heat']:.2f}{extra}")
        else:
            lines.append(f"  stage2: {s2['status']} ({s2['reason']})")
    scan = report.get("scan")
    if scan is not None:
        lines += ["", f"== extraction {scan['root']}"]
        for pkg, row in scan["matrix"].items():
            cells = ", ".join(f"{k}={v}" for k, v in row.items() if v != "not evaluated")
            lines.append(f"  {pkg}: {cells}")
        lines.append("  not evaluated: account info, installation time, recent usage time")
        for f in scan["findings"]:
            ext = f" (as {f['recovered_extension']})" if f["recovered_extension"] else ""
            lines.append(f"  {f['kind']:<13} {f['format']:<7} {f['path']}{ext}")
            lines += [f"      {n}" for n in f["notes"]]
        lines += [f"  diagnostic: {d}" for d in scan["diagnostics"]]
    return "\n".join(lines) + "\n"
