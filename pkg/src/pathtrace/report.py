"""Versioned JSON report documents and their plain-text rendering."""

from __future__ import annotations

from dataclasses import asdict

from .attribution import AttributionConfig
from .pathfinder import PathConfig

REPORT_VERSION = 1


def build_document(reports: dict, target: str, cfg: PathConfig, acfg: AttributionConfig,
                   scm_metadata: dict | None = None) -> dict:
    return {
        "version": REPORT_VERSION,
        "target": target,
        "path_config": asdict(cfg),
        "attribution_config": asdict(acfg),
        "scm": scm_metadata or {},
        "reports": [r.to_json() for _, r in sorted(reports.items())],
    }


def _table(headers, rows) -> list[str]:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    line = "  ".join(str(h).ljust(w) for h, w in zip(headers, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return out


def render_text(doc: dict) -> str:
    """Summary table (date, top path, PCS) followed by per-date node tables
    for the top path and the list of candidate paths. Uses only ``doc``."""
    cfg = doc["path_config"]
    lines = [f"Root-cause pathways for {doc['target']} "
             f"(theta={cfg['theta']}, alpha={cfg['alpha']}, beta={cfg['beta']}, gamma={cfg['gamma']})", ""]
    summary = []
    for rep in doc["reports"]:
        if rep["paths"]:
            top = rep["paths"][0]
            summary.append((rep["date"], " -> ".join(top["nodes"]), f"{top['significance']:.4f}"))
        else:
            summary.append((rep["date"], "(no accepted path)", "-"))
    lines += _table(("Anomaly Date", "Identified Causal Path", "PCS"), summary)

    for rep in doc["reports"]:
        lines += ["", f"== {rep['date']} ({rep['n_rows']} rows, {len(rep['paths'])} candidate paths) =="]
        if not rep["paths"]:
            # nothing cleared the thresholds; show every node so the gap is visible
            rows = [(n, f"{s['combined']:.4f}", f"{s['mean_structural']:.4f}", f"{s['max_abs_noise']:.4f}")
                    for n, s in sorted(rep["node_scores"].items(), key=lambda kv: -kv[1]["combined"])]
            lines += _table(("Node", "Combined Score", "Structural Score", "Noise Contribution"), rows)
            continue
        top = rep["paths"][0]
        rows = [(s["node"], f"{s['combined']:.4f}", f"{s['max_abs_noise']:.4f}") for s in top["scores"]]
        lines += _table(("Node", "Combined Score", "Noise Contribution"), rows)
        lines.append("")
        cand = [(i + 1, " -> ".join(p["nodes"]), f"{p['significance']:.4f}", f"{p['consistency']:.4f}",
                 f"{p['terminal_mean_noise']:.4f}") for i, p in enumerate(rep["paths"])]
        lines += _table(("#", "Path", "PCS", "Consistency", "Terminal mean noise"), cand)
    return "\n".join(lines) + "\n"


def top_paths(doc: dict) -> dict[str, list[str] | None]:
    return {r["date"]: (r["paths"][0]["nodes"] if r["paths"] else None) for r in doc["reports"]}
