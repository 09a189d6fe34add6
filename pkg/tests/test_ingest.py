import html
import logging
import re
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from regbench import ingest
from regbench.datamodel import load_csv, read_csv_text
from regbench.errors import JoinError, MalformedPostError, ParseError

DATA = Path(__file__).parent / "data"


def test_block_versus_inline():
    body = "<p>try <code>x</code></p><pre><code>int a;\nint b;</code></pre>"
    assert ingest.extract_code_blocks(body) == ["int a;\nint b;"]


def test_entities_decoded():
    body = "<pre><code>a &lt; b &amp;&amp; c &gt; d\ns = &quot;q&quot; + &#39;c&#39;;</code></pre>"
    assert ingest.extract_code_blocks(body) == ["a < b && c > d\ns = \"q\" + 'c';"]


def test_empty_and_malformed():
    assert ingest.extract_code_blocks("") == []
    with pytest.raises(MalformedPostError, match="post 42"):
        ingest.extract_code_blocks("<pre><code>x\ny", post_id=42)
    with pytest.raises(MalformedPostError):
        ingest.extract_code_blocks("x</code>")


def test_nested_code_in_block_is_skipped(caplog):
    with caplog.at_level(logging.WARNING):
        out = ingest.extract_code_blocks("<pre><code>a<code>b</code>\nc</code></pre><pre><code>d\ne</code></pre>")
    assert out == ["d\ne"]
    assert "nested" in caplog.text


def test_filter_multiline():
    assert ingest.filter_multiline(["x", "a;\nb;"]) == ["a;\nb;"]
    assert ingest.filter_multiline([]) == []


code_text = st.text(alphabet=st.sampled_from(list("ab <>&\"'\n;{}")), max_size=30)


@given(st.lists(code_text, max_size=5))
def test_extract_then_filter_is_idempotent(snippets):
    body = "".join(f"<pre><code>{html.escape(s)}</code></pre>" for s in snippets)
    first = ingest.filter_multiline(ingest.extract_code_blocks(body))
    again_body = "".join(f"<pre><code>{html.escape(s)}</code></pre>" for s in first)
    assert ingest.filter_multiline(ingest.extract_code_blocks(again_body)) == first
    assert ingest.filter_multiline(first) == first


def test_wrapping_examples():
    assert ingest.wrap_snippet("class A{}", 7) == "class A{}"
    assert ingest.wrap_snippet("int x = 1;\nx++;", 1234) == "public class C1234{\nint x = 1;\nx++;\n}"
    assert ingest.wrap_snippet("classify(x);\nrun();", 9).startswith("public class C9{")
    assert ingest.snippet_filename(1234) == "C1234.java"


def oracle_has_keyword(code):
    # split on anything that cannot be part of a Java identifier
    tokens = re.split(r"[^A-Za-z0-9_$]+", code)
    return any(t in ("import", "package", "class") for t in tokens)


@pytest.mark.parametrize("code", [
    "import java.util.*;\nList x;", "package a.b;\nint y;", "x.class\ny", "subclass z;\nw", "importer();\nq",
    "my_class = 1;\nb", "$class;\nc", "class1 = 2;\nd", "a;//class\nb", "String s = \"package\";\nt",
])
def test_wrapping_matches_tokenizer_oracle(code):
    wrapped = ingest.wrap_snippet(code, 1) != code
    assert wrapped == (not oracle_has_keyword(code))


def test_compute_attributes():
    assert ingest.compute_attributes("a b;\nc;") == (2, 7, 1)
    assert ingest.compute_attributes("x;\n") == (1, 3, 0)
    assert ingest.compute_attributes("a;\n\nb;") == (3, 6, 0)
    with pytest.raises(Exception):
        ingest.compute_attributes("")


def test_five_post_fixture_end_to_end(tmp_path):
    posts = ingest.load_posts(DATA / "five_posts.csv")
    snippets = ingest.extract_snippets(posts)
    assert ingest.features_csv_text(snippets) == (DATA / "five_features_expected.csv").read_text()
    written = ingest.write_snippet_files(snippets, tmp_path)
    assert [p.name for p in written] == [f"C{i}.java" for i in range(1, 7)]
    assert (tmp_path / "C2.java").read_text() == "class A {\n}\n"
    assert (tmp_path / "C1.java").read_text() == "public class C1{\nint a = 1;\nint b = 2;\n}"
    violations = ingest.read_violations((DATA / "five_violations.csv").read_text())
    table = ingest.build_modeling_table(posts, snippets, violations)
    assert table == load_csv(DATA / "five_table_expected.csv")
    assert table.column_names == list(ingest.TABLE_COLUMNS)


def test_spa_and_total_invariants():
    posts = ingest.load_posts(DATA / "five_posts.csv")
    snippets = ingest.extract_snippets(posts)
    for s in snippets:
        assert s.spa == sum(1 for t in snippets if t.answer_id == s.answer_id)
    violations = ingest.read_violations((DATA / "five_violations.csv").read_text())
    table = ingest.build_modeling_table(posts, snippets, violations)
    parts = sum(table.column(c) for c in ingest.VIOLATION_CATEGORIES)
    assert (parts == table.column("total_violations")).all()
    assert read_csv_text(table.to_csv_text()) == table


def test_three_snippets_share_spa():
    body = "".join(f"<pre><code>s{i};\nt;</code></pre>" for i in range(3))
    post = ingest.PostRecord(1, 1, 0, 0, 1, 1, 0, 0, body)
    assert [s.spa for s in ingest.extract_snippets([post])] == [3, 3, 3]


def test_join_errors():
    posts = ingest.load_posts(DATA / "five_posts.csv")
    snippets = ingest.extract_snippets(posts)
    with pytest.raises(JoinError, match="99"):
        ingest.build_modeling_table(posts, snippets, [ingest.ViolationCounts(99, 0, 0, 0, 0)])
    dup = [ingest.ViolationCounts(1, 0, 0, 0, 0)] * 2
    with pytest.raises(JoinError, match="duplicate"):
        ingest.build_modeling_table(posts, snippets, dup)
    with pytest.raises(JoinError, match="answer_id"):
        ingest.build_modeling_table(posts[2:], snippets, [])


def test_parse_errors():
    with pytest.raises(ParseError):
        ingest.read_violations("snippet_id,reliability\n1,2\n")
    with pytest.raises(ParseError):
        ingest.read_violations("snippet_id,reliability,readability,performance,security\n1,-2,0,0,0\n")


def test_violation_total():
    assert ingest.ViolationCounts(1, 2, 3, 4, 5).total == 14
