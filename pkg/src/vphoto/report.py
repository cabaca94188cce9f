"""Ranked manifests and the static gallery report.

The manifest is JSON lines, one candidate per line, written in rank order
with sorted keys so identical runs produce identical bytes.  The gallery is
a self-contained HTML index over the written images; it can be regenerated
from a saved manifest without recomputing anything.
"""

from __future__ import annotations

import html
import json
from pathlib import Path

from .raster import save_png

MANIFEST_NAME = "manifest.jsonl"
INDEX_NAME = "index.html"
IMAGE_DIR = "images"


def candidate_records(candidates) -> list[dict]:
    records = []
    for rank, cand in enumerate(candidates, start=1):
        rec = cand.to_record()
        rec["rank"] = rank
        rec["image"] = f"{IMAGE_DIR}/{rank:04d}_{rec['pano_id']}_v{rec['view_index']}.png"
        records.append(rec)
    return records


def write_manifest(records, path) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _row(rec: dict) -> str:
    w = rec["window"]
    window_text = f"{w['w']}x{w['h']}+{w['x']}+{w['y']}"
    scores = (
        f"crop {rec['composition_score']:.4f} / sat {rec['saturation_score']:.4f} / "
        f"hdr {rec['hdr_score']:.4f} / overall {rec['overall_score']:.4f}"
    )
    params = (
        f"c={rec['composition_weight']:g}, hdr={rec['hdr_value']:g}, "
        f"sat={rec['saturation_value']:g}, mask={rec['snapshot_id']}"
    )
    return (
        "<tr>"
        f"<td>{rec['rank']}</td>"
        f"<td><img src=\"{html.escape(rec['image'])}\" alt=\"\"></td>"
        f"<td>{html.escape(str(rec['pano_id']))} / view {rec['view_index']}</td>"
        f"<td>{window_text}</td>"
        f"<td>{html.escape(params)}</td>"
        f"<td>{html.escape(scores)}</td>"
        f"<td>{rec['predicted_level']:.3f}</td>"
        "</tr>"
    )


def render_index_html(records) -> str:
    """Gallery page listing candidates by predicted level, highest first.

    With a positive scale slope this is exactly the manifest's rank order;
    the sort is stable so ties keep that order too.
    """
    ordered = sorted(records, key=lambda r: (-r["predicted_level"], r["rank"]))
    rows = "\n".join(_row(rec) for rec in ordered)
    return f"""<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>vphoto gallery</title>
<style>
body {{ font-family: sans-serif; margin: 2em; }}
table {{ border-collapse: collapse; }}
td, th {{ border: 1px solid #ccc; padding: 6px 10px; vertical-align: top; }}
img {{ max-width: 280px; height: auto; }}
</style>
</head>
<body>
<h1>vphoto gallery</h1>
<table>
<tr><th>rank</th><th>photo</th><th>source</th><th>window</th><th>parameters</th><th>score trail</th><th>predicted level</th></tr>
{rows}
</table>
</body>
</html>
"""


def emit_gallery(candidates, out_dir) -> Path:
    """Write final images, the ranked manifest and the HTML index.

    Returns the manifest path.  Candidates must still carry their images.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to report")
    out = Path(out_dir)
    (out / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    records = candidate_records(candidates)
    for cand, rec in zip(candidates, records):
        if cand.image is None:
            raise ValueError("candidate lost its image; cannot write the gallery")
        save_png(cand.image, out / rec["image"])
    manifest = out / MANIFEST_NAME
    write_manifest(records, manifest)
    (out / INDEX_NAME).write_text(render_index_html(records))
    return manifest


def regenerate_report(manifest_path, out_dir) -> Path:
    """Rebuild the HTML index from a saved manifest, byte-identical to the
    original; images are referenced, not rewritten."""
    records = read_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = out / INDEX_NAME
    index.write_text(render_index_html(records))
    return index
