import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from docrag.chunking import Chunk, chunk_by_title
from docrag.embedding import MockEmbeddingClient, embed_chunks
from docrag.errors import SchemaViolation
from docrag.partition import Element, ElementKind, ElementMetadata
from docrag.serialize import (
    chunk_from_json,
    chunk_to_json,
    element_from_json,
    element_to_json,
    index_metadata,
    read_chunks,
    read_elements,
    read_manifest,
    write_chunks,
    write_elements,
    write_manifest,
)

from oracles import random_config, random_elements


def test_element_wire_format():
    el = Element(ElementKind.TITLE, "污水 Title", 3, ElementMetadata(
        source_name="a.docx", section_path=("污水 Title",), languages=frozenset({"latin", "cjk"})))
    line = json.dumps(element_to_json(el), ensure_ascii=False, separators=(",", ":"))
    assert line == (
        '{"el_version":1,"kind":"Title","text":"污水 Title","seq":3,"metadata":{"source_name":"a.docx",'
        '"section_path":["污水 Title"],"languages":["cjk","latin"],"caption":null,"text_as_html":null,'
        '"image_ref":null,"derived_from":null,"error":null}}'
    )
    assert element_from_json(json.loads(line)) == el


def test_chunk_wire_format():
    chunk = Chunk("abc", "Table 1 x\na b", "table", (4,), "Intro", "a.docx", "<table/>", "Table 1 x")
    assert chunk_to_json(chunk) == {
        "ck_version": 1, "id": "abc", "text": "Table 1 x\na b", "kind": "table", "section_title": "Intro",
        "char_count": 13, "element_seqs": [4], "source_name": "a.docx", "continuation": False,
        "text_as_html": "<table/>", "caption": "Table 1 x",
    }
    plain = chunk_to_json(Chunk("i", "t", "composite", (0,), None))
    assert "text_as_html" not in plain and "caption" not in plain


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trips(seed):
    rng = random.Random(seed)
    elements = random_elements(rng)
    for el in elements:
        assert element_from_json(json.loads(json.dumps(element_to_json(el)))) == el
    for chunk in chunk_by_title(elements, random_config(rng)):
        assert chunk_from_json(json.loads(json.dumps(chunk_to_json(chunk)))) == chunk


def test_files(tmp_path):
    elements = random_elements(random.Random(3))
    write_elements(tmp_path / "e.jsonl", elements)
    assert read_elements(tmp_path / "e.jsonl") == elements
    chunks = chunk_by_title(elements)
    write_chunks(tmp_path / "c.jsonl", chunks)
    assert read_chunks(tmp_path / "c.jsonl") == chunks
    assert (tmp_path / "c.jsonl").read_text(encoding="utf-8").count("\n") == len(chunks)


@pytest.mark.parametrize(
    "obj, field",
    [
        ({"ck_version": 2}, "ck_version"),
        ({"ck_version": 1, "id": "x", "text": "t", "kind": "composite"}, "element_seqs"),
        ({"ck_version": 1, "id": "x", "text": "t", "kind": "poem", "element_seqs": [0]}, "kind"),
        ({"ck_version": 1, "id": "x", "text": "t", "kind": "composite", "element_seqs": [0], "char_count": 5},
         "char_count"),
        ({"ck_version": 1, "id": 5, "text": "t", "kind": "composite", "element_seqs": [0]}, "id"),
        ({"ck_version": 1, "id": "x", "text": "t", "kind": "composite", "element_seqs": [True]}, "element_seqs"),
    ],
)
def test_chunk_violations(obj, field):
    with pytest.raises(SchemaViolation) as err:
        chunk_from_json(obj)
    assert err.value.field == field


def test_element_violations(tmp_path):
    with pytest.raises(SchemaViolation):
        element_from_json({"el_version": 1, "kind": "Poem", "text": "", "seq": 0})
    with pytest.raises(SchemaViolation):
        element_from_json([1, 2])
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"el_version": 1, "kind": "Title", "text": "x", "seq": 0}\n{oops\n', encoding="utf-8")
    with pytest.raises(SchemaViolation) as err:
        read_elements(bad)
    assert err.value.field == "bad.jsonl:2"


def test_manifest_round_trip(tmp_path):
    chunks = chunk_by_title(random_elements(random.Random(11)))
    vectors = embed_chunks(chunks, MockEmbeddingClient(dim=8))
    path = tmp_path / "vectors.json"
    write_manifest(path, chunks, vectors, dimension=8, model="mock")
    assert (tmp_path / "vectors.f32").stat().st_size == len(vectors) * 8 * 4
    dim, records = read_manifest(path)
    assert dim == 8 and [r.id for r in records] == [cid for cid, _ in vectors]
    by_id = {c.id: c for c in chunks}
    for rec, (_, vec) in zip(records, vectors):
        assert np.array_equal(rec.vector, vec)
        assert rec.metadata == index_metadata(by_id[rec.id])


def test_manifest_tampering(tmp_path):
    chunks = chunk_by_title(random_elements(random.Random(12)))
    vectors = embed_chunks(chunks, MockEmbeddingClient(dim=4))
    path = tmp_path / "m.json"
    write_manifest(path, chunks, vectors, dimension=4, model="mock")
    blob = tmp_path / "m.f32"
    data = blob.read_bytes()
    blob.write_bytes(data[:-1] + bytes([data[-1] ^ 1]))
    with pytest.raises(SchemaViolation) as err:
        read_manifest(path)
    assert err.value.field == "vectors_sha256"


def test_index_metadata_uses_embedded_text():
    chunk = Chunk("i", "a b", "table", (0,), None, "s.docx", "<table/>")
    assert index_metadata(chunk) == {"text": "a b\n<table/>", "source_name": "s.docx", "kind": "table"}
