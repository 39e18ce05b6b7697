"""Per-package TD reports as canonical JSON or a self-contained HTML page."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from html import escape
from typing import Iterable, Sequence

from .corpus import TD_TYPES, RawComment
from .pipeline import EPOCH, PipelineModel, TdInstance, classify_comments

REPORT_SCHEMA_VERSION = 1


def _sort_key(inst: TdInstance):
    return (inst.comment_id, inst.position)


@dataclass
class TdReport:
    package: str
    platform: str
    generated_at: str
    instances: list[TdInstance] = field(default_factory=list)

    def __post_init__(self):
        self.instances = sorted(self.instances, key=_sort_key)

    @property
    def totals(self) -> dict[str, int]:
        c = Counter(i.td_type for i in self.instances)
        return {t: c.get(t, 0) for t in TD_TYPES}

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "package": self.package,
            "platform": self.platform,
            "generated_at": self.generated_at,
            "totals": self.totals,
            "instances": [i.to_dict() for i in self.instances],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TdReport":
        report = cls(d["package"], d["platform"], d["generated_at"], [TdInstance.from_dict(x) for x in d["instances"]])
        if d.get("totals") and d["totals"] != report.totals:
            raise ValueError("report totals disagree with its instances")
        return report


def build_report(model: PipelineModel, comments: Iterable[RawComment], package: str, generated_at: str | None = None) -> TdReport:
    """Classify every comment of ``package``.

    ``generated_at`` defaults to the newest comment timestamp, keeping the
    output a pure function of its inputs.
    """
    mine = [c for c in comments if c.package == package]
    platform = mine[0].platform if mine else ""
    stamp = generated_at or max((c.created_at for c in mine), default=EPOCH)
    return TdReport(package, platform, stamp, classify_comments(model, mine))


_CSS = """
body{font-family:sans-serif;max-width:60rem;margin:2rem auto;color:#222}
table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:.2rem .6rem}
td.n{text-align:right}li{margin:.3rem 0}.meta{color:#666;font-size:.9em}
"""


def _render_html(report: TdReport) -> str:
    out = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>TD report: {escape(report.package)}</title>",
        f"<style>{_CSS}</style></head><body>",
        f"<h1>Technical debt report: {escape(report.package)}</h1>",
        f'<p class="meta">platform: {escape(report.platform)} &middot; generated: {escape(report.generated_at)}'
        f" &middot; {len(report.instances)} instances</p>",
        "<h2>Totals</h2>",
        "<table><thead><tr><th>type</th><th>count</th></tr></thead><tbody>",
    ]
    for t, n in report.totals.items():
        out.append(f'<tr><td>{escape(t)}</td><td class="n">{n}</td></tr>')
    out.append("</tbody></table>")
    for t in TD_TYPES:
        items = [i for i in report.instances if i.td_type == t]
        if not items:
            continue
        out.append(f'<h2 id="{escape(t)}">{escape(t)} ({len(items)})</h2><ul>')
        for i in items:
            out.append(
                f'<li><a href="{escape(i.url, quote=True)}">{escape(i.comment_id)}</a>'
                f' <span class="meta">[{escape(i.cluster)}]</span> {escape(i.sentence)}</li>'
            )
        out.append("</ul>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def render_report(report: TdReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n").encode("utf-8")
    if fmt == "html":
        return _render_html(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def reports_by_package(model: PipelineModel, comments: Sequence[RawComment]) -> list[TdReport]:
    return [build_report(model, comments, p) for p in sorted({c.package for c in comments})]
