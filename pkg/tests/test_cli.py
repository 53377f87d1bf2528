import io
import json
import subprocess
import sys

import jsonschema
import pytest

from imgforensics import __version__
from imgforensics.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, run_cli
from imgforensics.pipeline import report_schema
from imgforensics.refdb import ReferenceDb
from imgforensics.synth import (build_extraction_tree, labeled_corpus, make_jpeg, pristine_fixture,
                                psx_fixture, smooth_gradient)


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def db_path(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    by_label = {}
    for s in labeled_corpus(per_editor=2):
        by_label.setdefault(s.label, []).append(s)
    path = base / "ref.sqlite"
    for label, samples in by_label.items():
        d = base / label.replace("@", "_").replace(" ", "_")
        d.mkdir()
        for s in samples:
            (d / s.filename).write_bytes(s.data)
        code, out, _ = cli("db", "ingest", d, "--label", label, "--db", path)
        assert code == EXIT_OK and f"ingested {len(samples)} file(s)" in out
    return path


@pytest.fixture
def images(tmp_path):
    paths = []
    for fixture in (psx_fixture, pristine_fixture):
        name, data = fixture()
        (tmp_path / name).write_bytes(data)
        paths.append(tmp_path / name)
    return paths


def test_analyze_json_report(db_path, images):
    code, out, _ = cli("--db", db_path, "--report", "json", "analyze", *images)
    assert code == EXIT_OK
    report = json.loads(out)
    jsonschema.validate(report, report_schema())
    assert [i["verdict"] for i in report["images"]] == ["manipulation-indicated", "no-signal"]
    assert report["db_snapshot"] == ReferenceDb(db_path, readonly=True).digest()


def test_global_flags_after_subcommand(db_path, images):
    before = cli("--db", db_path, "--report", "json", "--ela-quality", "90", "analyze", images[0])
    after = cli("analyze", images[0], "--db", db_path, "--report", "json", "--ela-quality", "90")
    assert before == after
    assert json.loads(after[1])["options"]["ela_quality"] == 90


def test_analyze_text_and_heatmaps(images, tmp_path):
    code, out, _ = cli("analyze", images[0], "--out", tmp_path / "h", "--jobs", "2")
    assert code == EXIT_OK
    assert "verdict:" in out and "reference db: none" in out
    assert (tmp_path / "h" / f"{images[0].name}.ela.png").exists()


@pytest.mark.parametrize("argv", [
    ["analyze"],
    ["bogus"],
    ["analyze", "x.jpg", "--ela-quality", "0"],
    ["analyze", "x.jpg", "--ela-amp", "-1"],
    ["analyze", "x.jpg", "--median-window", "4"],
    ["--report", "xml", "dqt", "x.jpg"],
    ["db", "export", "-"],
    ["db", "ingest", ".", "--label", "nolabel", "--db", "x.sqlite"],
])
def test_usage_errors(argv):
    code, _, _ = cli(*argv)
    assert code == EXIT_USAGE


def test_io_errors(tmp_path):
    code, _, err = cli("analyze", tmp_path / "missing.jpg")
    assert code == EXIT_IO and "FileUnreadable" in err
    assert cli("analyze", "x.jpg", "--db", tmp_path / "none.sqlite")[0] == EXIT_IO
    assert cli("scan", tmp_path / "nowhere")[0] == EXIT_IO
    (tmp_path / "bad.jpg").write_bytes(b"\xff\xd8\xff\xdb\x00")
    code, _, err = cli("dqt", tmp_path / "bad.jpg")
    assert code == EXIT_IO and "TruncatedSegment" in err


def test_dqt_command(tmp_path):
    path = tmp_path / "a.jpg"
    path.write_bytes(make_jpeg(smooth_gradient(16, 16), 50))
    code, out, _ = cli("dqt", path)
    assert code == EXIT_OK
    assert out.splitlines()[0] == "table 0 (8-bit)"
    assert out.splitlines()[1].split() == ["16", "11", "10", "16", "24", "40", "51", "61"]
    doc = json.loads(cli("--report", "json", "dqt", path)[1])
    assert doc["fingerprint"] == "c44701e8185306f5e6d09be16a2b0fbd"


def test_exif_command(tmp_path):
    name, data = psx_fixture()
    (tmp_path / name).write_bytes(data)
    code, out, _ = cli("exif", tmp_path / name)
    assert code == EXIT_OK and "ifd0.Software: Adobe Photoshop Express (Android)" in out
    doc = json.loads(cli("exif", tmp_path / name, "--report", "json")[1])
    assert doc["editor_signature"]["software"] == "Adobe Photoshop Express (Android)"
    (tmp_path / "plain.jpg").write_bytes(make_jpeg(smooth_gradient(8, 8), 80))
    assert cli("exif", tmp_path / "plain.jpg")[1] == "no Exif segment\n"


def test_scan_command(tmp_path, db_path):
    build_extraction_tree(str(tmp_path / "ext"))
    code, out, _ = cli("scan", tmp_path / "ext", "--db", db_path, "--report", "json")
    assert code == EXIT_OK
    report = json.loads(out)
    jsonschema.validate(report, report_schema())
    assert "com.mt.mtxx.mtxx" in report["scan"]["matrix"]


def test_export_import_roundtrip(tmp_path, db_path):
    snap = tmp_path / "snap.jsonl"
    assert cli("db", "export", snap, "--db", db_path)[0] == EXIT_OK
    code, stdout_snap, _ = cli("db", "export", "-", "--db", db_path)
    assert code == EXIT_OK and stdout_snap == snap.read_text()
    fresh = tmp_path / "fresh.sqlite"
    assert cli("db", "import", snap, "--db", fresh)[0] == EXIT_OK
    with ReferenceDb(fresh, readonly=True) as a, ReferenceDb(db_path, readonly=True) as b:
        assert a.rows() == b.rows()
    # refuses to overwrite a populated DB
    code, _, err = cli("db", "import", snap, "--db", fresh)
    assert code == EXIT_IO and "not empty" in err


def test_ingest_skips_non_images(tmp_path):
    d = tmp_path / "mixed"
    d.mkdir()
    (d / "notes.txt").write_text("hello")
    (d / "a.jpg").write_bytes(make_jpeg(smooth_gradient(8, 8), 90, exif={"software": "X"}))
    code, out, _ = cli("db", "ingest", d, "--label", "X@1", "--db", tmp_path / "r.sqlite")
    assert code == EXIT_OK and "ingested 1 file(s) as X@1, skipped 1" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "imgforensics", "--version"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and res.stdout.strip() == f"imgforensics {__version__}"
