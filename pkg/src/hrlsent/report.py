"""Static renderings of which clauses and words a decode kept."""

from __future__ import annotations

import html
from dataclasses import dataclass

STYLE = """body{font-family:sans-serif;max-width:52em;margin:2em auto}
.clause{display:block;padding:.2em .4em;margin:.2em 0;color:#777}
.clause.selected{color:#000;border-left:4px solid #c0392b;background:#fdecea}
.word.selected{background:#c0392b;color:#fff;padding:0 .15em}
.gold{outline:1px dashed #2c7}
.flag{color:#c0392b;font-weight:bold}"""


@dataclass
class SelectionReport:
    text: str
    html: str


def render_selection_report(doc, aspect: str, rollout, gold_rating=None,
                            gold_clause_mask=None) -> SelectionReport:
    """Mark selected clauses and selected words, with predicted and gold ratings.

    In the text form a kept clause starts with ``[x]`` and a kept word is
    wrapped in ``*``; discarded clauses start with ``[ ]``.  Clauses in the
    gold mask (when given) get a trailing ``(gold)``.
    """
    clause_mask = rollout.clause_mask
    word_masks = rollout.word_masks(doc)
    header = [f"document {doc.id}", f"aspect {aspect}", f"predicted rating {rollout.predicted}"]
    if gold_rating is not None:
        header.append(f"gold rating {gold_rating}")
    if rollout.fallback:
        header.append("FALLBACK: no clause selected, rating drawn at random")

    lines = list(header) + [""]
    for k, clause in enumerate(doc.clauses):
        words = [f"*{t}*" if sel else t for t, sel in zip(clause.tokens, word_masks[k])]
        mark = "[x]" if clause_mask[k] else "[ ]"
        gold = " (gold)" if gold_clause_mask is not None and gold_clause_mask[k] else ""
        lines.append(f"{mark} {' '.join(words)}{gold}")
    text = "\n".join(lines) + "\n"

    esc = html.escape
    parts = ["<!DOCTYPE html>", "<html>", "<head>", '<meta charset="utf-8">',
             f"<title>{esc(doc.id)} / {esc(aspect)}</title>", f"<style>{STYLE}</style>",
             "</head>", "<body>", f"<h1>{esc(doc.id)}</h1>", "<ul>"]
    for item in header[1:]:
        cls = ' class="flag"' if item.startswith("FALLBACK") else ""
        parts.append(f"<li{cls}>{esc(item)}</li>")
    parts.append("</ul>")
    parts.append("<div>")
    for k, clause in enumerate(doc.clauses):
        classes = ["clause"]
        if clause_mask[k]:
            classes.append("selected")
        if gold_clause_mask is not None and gold_clause_mask[k]:
            classes.append("gold")
        spans = []
        for t, sel in zip(clause.tokens, word_masks[k]):
            cls = "word selected" if sel else "word"
            spans.append(f'<span class="{cls}">{esc(t)}</span>')
        parts.append(f'<p class="{" ".join(classes)}">{" ".join(spans)}</p>')
    parts += ["</div>", "</body>", "</html>"]
    return SelectionReport(text, "\n".join(parts) + "\n")
