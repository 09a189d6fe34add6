"""Turn Q&A post exports and static-analysis counts into the modeling table."""
from __future__ import annotations

import csv
import html
import io
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .datamodel import DataTable
from .errors import InputError, JoinError, MalformedPostError, ParseError

log = logging.getLogger(__name__)

POST_FIELDS = ("answer_id", "question_id", "answer_score", "question_score", "view_count",
               "answer_count", "comment_count", "accepted", "answer_body")
VIOLATION_FIELDS = ("snippet_id", "reliability", "readability", "performance", "security")
VIOLATION_CATEGORIES = ("reliability", "readability", "performance", "security")
CODE_ATTRIBUTES = ("question_score", "view_count", "answer_count", "comment_count", "answer_score",
                   "code_length", "code_spaces", "loc", "spa", "accepted")
TABLE_COLUMNS = CODE_ATTRIBUTES + VIOLATION_CATEGORIES + ("total_violations",)
FEATURE_FIELDS = ("snippet_id", "answer_id", "loc", "code_length", "code_spaces", "spa")
WRAP_KEYWORDS = ("import", "package", "class")

_TAG = re.compile(r"<(/?)(pre|code)\b[^>]*>", re.IGNORECASE)
_WORD = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")


@dataclass(frozen=True)
class PostRecord:
    answer_id: int
    question_id: int
    answer_score: int
    question_score: int
    view_count: int
    answer_count: int
    comment_count: int
    accepted: int
    answer_body: str


@dataclass(frozen=True)
class SnippetRecord:
    snippet_id: int
    answer_id: int
    code: str
    loc: int
    code_length: int
    code_spaces: int
    spa: int


@dataclass(frozen=True)
class ViolationCounts:
    snippet_id: int
    reliability: int
    readability: int
    performance: int
    security: int

    @property
    def total(self) -> int:
        return self.reliability + self.readability + self.performance + self.security


def extract_code_blocks(post_body: str, post_id=None) -> list[str]:
    """Block-level ``<pre><code>`` contents in document order, entities decoded.

    In-line ``<code>`` spans outside ``<pre>`` are skipped. Unbalanced tags
    raise :class:`MalformedPostError`; a ``<code>`` nested inside another
    ``<code>`` within a block is flagged with a warning and the block skipped.
    """
    label = f"post {post_id}" if post_id is not None else "post"
    if not post_body:
        return []
    blocks = []
    pre_depth = 0
    code_depth = 0
    block_start = None  # offset just after <pre><code>
    block_ok = True
    for m in _TAG.finditer(post_body):
        closing, tag = m.group(1) == "/", m.group(2).lower()
        if tag == "pre":
            if not closing:
                if pre_depth:
                    raise MalformedPostError(f"{label}: nested <pre> at offset {m.start()}")
                pre_depth = 1
            else:
                if not pre_depth:
                    raise MalformedPostError(f"{label}: </pre> without <pre> at offset {m.start()}")
                if code_depth:
                    raise MalformedPostError(f"{label}: </pre> closes an open <code> at offset {m.start()}")
                pre_depth = 0
        else:
            if not closing:
                if code_depth:
                    if pre_depth:
                        block_ok = False
                    code_depth += 1
                    continue
                code_depth = 1
                if pre_depth:
                    block_start = m.end()
                    block_ok = True
            else:
                if not code_depth:
                    raise MalformedPostError(f"{label}: </code> without <code> at offset {m.start()}")
                code_depth -= 1
                if code_depth == 0 and block_start is not None:
                    if block_ok:
                        blocks.append(html.unescape(post_body[block_start:m.start()]))
                    else:
                        log.warning("%s: nested <code> inside a <pre> block; block skipped", label)
                    block_start = None
    if pre_depth or code_depth:
        raise MalformedPostError(f"{label}: unclosed <{'pre' if pre_depth else 'code'}> tag")
    return blocks


def filter_multiline(snippets: Iterable[str]) -> list[str]:
    return [s for s in snippets if "\n" in s]


def needs_wrapping(code: str) -> bool:
    words = set(_WORD.findall(code))
    return not any(k in words for k in WRAP_KEYWORDS)


def wrap_snippet(code: str, snippet_id: int) -> str:
    """Leave code containing a whole-word ``import``/``package``/``class`` as is, else wrap it in ``C<id>``."""
    if not needs_wrapping(code):
        return code
    return f"public class C{snippet_id}{{\n{code}\n}}"


def snippet_filename(snippet_id: int) -> str:
    return f"C{snippet_id}.java"


def compute_attributes(code: str) -> tuple[int, int, int]:
    """(loc, code_length, code_spaces); one trailing newline does not open a new line."""
    if not code:
        raise InputError("cannot compute attributes of empty code")
    body = code[:-1] if code.endswith("\n") else code
    loc = body.count("\n") + 1
    return loc, len(code), code.count(" ")


def _int_field(row: dict, name: str, where: str, nonnegative=False) -> int:
    raw = (row.get(name) or "").strip()
    if raw.lower() in ("true", "false"):
        value = int(raw.lower() == "true")
    else:
        try:
            number = float(raw)
            value = int(number)
            if number != value:
                raise ValueError(raw)
        except (ValueError, OverflowError):
            raise ParseError(f"{where}: column {name!r} is not an integer: {raw!r}") from None
    if nonnegative and value < 0:
        raise ParseError(f"{where}: column {name!r} must be nonnegative, got {value}")
    return value


def read_posts(text: str, source: str = "<posts>") -> list[PostRecord]:
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in POST_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f"{source}: missing columns {missing}")
    posts, seen = [], set()
    for line, row in enumerate(reader, start=2):
        where = f"{source} row {line}"
        rec = PostRecord(
            answer_id=_int_field(row, "answer_id", where),
            question_id=_int_field(row, "question_id", where),
            answer_score=_int_field(row, "answer_score", where),
            question_score=_int_field(row, "question_score", where),
            view_count=_int_field(row, "view_count", where, True),
            answer_count=_int_field(row, "answer_count", where, True),
            comment_count=_int_field(row, "comment_count", where, True),
            accepted=_int_field(row, "accepted", where, True),
            answer_body=row["answer_body"] or "",
        )
        if rec.accepted not in (0, 1):
            raise ParseError(f"{where}: accepted must be 0 or 1")
        if rec.answer_id in seen:
            raise ParseError(f"{where}: duplicate answer_id {rec.answer_id}")
        seen.add(rec.answer_id)
        posts.append(rec)
    return posts


def load_posts(path: str | Path) -> list[PostRecord]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    return read_posts(path.read_text(encoding="utf-8-sig"), str(path))


def extract_snippets(posts: Sequence[PostRecord]) -> list[SnippetRecord]:
    """Multiline block snippets ordered by (answer_id, document order), ids numbered from 1."""
    pending = []
    for post in sorted(posts, key=lambda p: p.answer_id):
        for code in filter_multiline(extract_code_blocks(post.answer_body, post.answer_id)):
            if not code.strip():
                log.warning("answer %s: whitespace-only snippet dropped", post.answer_id)
                continue
            pending.append((post.answer_id, code))
    per_answer = Counter(a for a, _ in pending)
    out = []
    for sid, (answer_id, code) in enumerate(pending, start=1):
        loc, length, spaces = compute_attributes(code)
        out.append(SnippetRecord(sid, answer_id, code, loc, length, spaces, per_answer[answer_id]))
    return out


def write_snippet_files(snippets: Sequence[SnippetRecord], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in snippets:
        p = out_dir / snippet_filename(s.snippet_id)
        p.write_text(wrap_snippet(s.code, s.snippet_id), encoding="utf-8")
        paths.append(p)
    return paths


def features_csv_text(snippets: Sequence[SnippetRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_FIELDS)
    for s in snippets:
        w.writerow([s.snippet_id, s.answer_id, s.loc, s.code_length, s.code_spaces, s.spa])
    return buf.getvalue()


def read_features(text: str, source: str = "<features>") -> list[SnippetRecord]:
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in FEATURE_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f"{source}: missing columns {missing}")
    out = []
    for line, row in enumerate(reader, start=2):
        where = f"{source} row {line}"
        vals = {f: _int_field(row, f, where, f != "snippet_id") for f in FEATURE_FIELDS}
        out.append(SnippetRecord(vals["snippet_id"], vals["answer_id"], "", vals["loc"],
                                 vals["code_length"], vals["code_spaces"], vals["spa"]))
    return out


def read_violations(text: str, source: str = "<violations>") -> list[ViolationCounts]:
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in VIOLATION_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f"{source}: missing columns {missing}")
    out = []
    for line, row in enumerate(reader, start=2):
        where = f"{source} row {line}"
        out.append(ViolationCounts(*(_int_field(row, f, where, f != "snippet_id") for f in VIOLATION_FIELDS)))
    return out


def build_modeling_table(posts: Sequence[PostRecord], snippets: Sequence[SnippetRecord],
                         violations: Sequence[ViolationCounts]) -> DataTable:
    """One row per snippet that has violation counts, in snippet order, with the 15 modeling columns.

    ``spa`` is recomputed as the number of snippets sharing the answer.
    """
    post_by_id = {p.answer_id: p for p in posts}
    snip_ids = Counter(s.snippet_id for s in snippets)
    dup = [sid for sid, c in snip_ids.items() if c > 1]
    if dup:
        raise JoinError(f"duplicate snippet_id {dup[0]} in features")
    viol_by_id: dict[int, ViolationCounts] = {}
    for v in violations:
        if v.snippet_id in viol_by_id:
            raise JoinError(f"duplicate snippet_id {v.snippet_id} in violations")
        if v.snippet_id not in snip_ids:
            raise JoinError(f"violations reference unknown snippet_id {v.snippet_id}")
        viol_by_id[v.snippet_id] = v
    for s in snippets:
        if s.answer_id not in post_by_id:
            raise JoinError(f"snippet {s.snippet_id} references unknown answer_id {s.answer_id}")
    per_answer = Counter(s.answer_id for s in snippets)

    rows = []
    for s in snippets:
        v = viol_by_id.get(s.snippet_id)
        if v is None:
            continue
        p = post_by_id[s.answer_id]
        rows.append((p.question_score, p.view_count, p.answer_count, p.comment_count, p.answer_score,
                     s.code_length, s.code_spaces, s.loc, per_answer[s.answer_id], p.accepted,
                     v.reliability, v.readability, v.performance, v.security, v.total))
    columns = list(zip(*rows)) if rows else [[] for _ in TABLE_COLUMNS]
    return DataTable(TABLE_COLUMNS, columns)
