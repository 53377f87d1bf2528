"""Regenerate tests/data/extraction and its manifest."""

import os
import shutil
import sys

from imgforensics.synth import build_extraction_tree, write_manifest

here = os.path.dirname(os.path.abspath(__file__))
data_dir = os.path.join(here, os.pardir, "tests", "data")
root = os.path.join(data_dir, "extraction")
if os.path.exists(root):
    if "--force" not in sys.argv:
        sys.exit(f"{root} exists; pass --force to rebuild")
    shutil.rmtree(root)
manifest = build_extraction_tree(root)
write_manifest(manifest, os.path.join(data_dir, "extraction_manifest.json"))
print(f"wrote {len(manifest['findings'])} findings under {root}")
