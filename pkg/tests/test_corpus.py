import pytest
from hypothesis import given
from hypothesis import strategies as st

from textmend import (
    CorpusDoc,
    DocOrigin,
    ScriptedChatBackend,
    SentencePair,
    TaskKind,
    build_corpus,
    generate_background,
    ingest_training_targets,
    load_corpus,
    save_corpus,
    split_sentences,
)
from textmend.corpus import (
    background_map,
    expand_sentence,
    expand_sentences,
    expand_term,
    expand_terms,
    load_terms,
    partition_by_origin,
)
from textmend.errors import BackendError, ExpansionError


def _pair(n, source, target):
    return SentencePair(id=f"p{n}", source=source, target=target, task=TaskKind.SPELLING)


# --- sentence splitting ---

def test_split_keeps_delimiter_attached():
    assert split_sentences("甲。乙！丙？") == ["甲。", "乙！", "丙？"]


def test_split_without_delimiter_returns_whole():
    assert split_sentences("没有标点的段落") == ["没有标点的段落"]


def test_split_drops_delimiter_only_fragments():
    assert split_sentences("。。。") == []


def test_split_newline_is_a_delimiter():
    assert split_sentences("第一行\n第二行。") == ["第一行\n", "第二行。"]


def test_split_reconstructs_terminated_paragraph():
    paragraph = "今天天气很好。我们去公园玩！你要来吗？"
    assert "".join(split_sentences(paragraph)) == paragraph


# --- training-target ingestion ---

def test_distinct_targets_map_one_to_one():
    docs = ingest_training_targets([_pair(1, "天汽很好", "天气很好"), _pair(2, "机器交易", "即期交易")])
    assert [d.text for d in docs] == ["天气很好", "即期交易"]
    assert all(d.origin is DocOrigin.TRAIN_TARGET for d in docs)


def test_shared_target_collapses():
    docs = ingest_training_targets(
        [_pair(1, "天汽很好", "天气很好"), _pair(2, "天气很好", "天气很好"), _pair(3, "机器交易", "即期交易")]
    )
    assert len(docs) == 2


def test_empty_input_gives_empty_list():
    assert ingest_training_targets([]) == []


def test_ecspell_law_shaped_dedup_counts():
    # 1,960 synthetic pairs, every 10th target repeated from the previous
    pairs = []
    for i in range(1960):
        base = i - (i % 10 == 9)  # 9 reuses 8's target, 19 reuses 18's, ...
        pairs.append(
            SentencePair(
                id=f"s{i}",
                source=f"错字句子第{i:04d}号",
                target=f"正确句子第{base:04d}号",
                task=TaskKind.SPELLING,
            )
        )
    docs = ingest_training_targets(pairs)
    expected_distinct = len({p.target for p in pairs})
    assert len(docs) == expected_distinct <= 1960
    targets = {p.target for p in pairs}
    assert all(d.text in targets for d in docs)


# --- LLM expansions ---

def test_expand_term_passes_reply_through():
    llm = ScriptedChatBackend(["即期指交易双方在成交后立即交割。"])
    doc = expand_term("即期", llm)
    assert doc.text == "即期指交易双方在成交后立即交割。"
    assert doc.origin is DocOrigin.TERM_EXPLANATION
    assert doc.meta == "即期"


def test_expand_term_empty_reply_is_expansion_error():
    llm = ScriptedChatBackend(["   "])
    with pytest.raises(ExpansionError) as excinfo:
        expand_term("即期", llm)
    assert excinfo.value.term == "即期"


def test_expand_terms_preserves_input_order():
    terms = [f"术语{i}" for i in range(10)]
    llm = ScriptedChatBackend([f"解释{i}" for i in range(10)])
    docs = expand_terms(terms, llm, max_workers=1)
    assert [d.meta for d in docs] == terms
    assert [d.text for d in docs] == [f"解释{i}" for i in range(10)]


def test_expand_sentence_splits_paragraph():
    llm = ScriptedChatBackend(["甲。乙！丙？"])
    docs = expand_sentence("原句", llm)
    assert [d.text for d in docs] == ["甲。", "乙！", "丙？"]
    assert all(d.origin is DocOrigin.TRAIN_EXPANSION for d in docs)


def test_expand_sentence_no_punctuation_single_doc():
    llm = ScriptedChatBackend(["整段没有标点"])
    assert len(expand_sentence("原句", llm)) == 1


def test_expand_sentences_order_matches_inputs():
    llm = ScriptedChatBackend(["第一段。", "第二段。"])
    results = expand_sentences(["甲", "乙"], llm, max_workers=1)
    assert [[d.text for d in docs] for docs in results] == [["第一段。"], ["第二段。"]]


# --- corpus building ---

def test_build_corpus_concatenates_in_order():
    train = [CorpusDoc(doc_id="t0", text="训练句", origin=DocOrigin.TRAIN_TARGET)]
    expansion = [
        CorpusDoc(doc_id="e0", text="扩句一。", origin=DocOrigin.TRAIN_EXPANSION),
        CorpusDoc(doc_id="e1", text="扩句二。", origin=DocOrigin.TRAIN_EXPANSION),
    ]
    term = [CorpusDoc(doc_id="x0", text="术语解释", origin=DocOrigin.TERM_EXPLANATION)]
    corpus = build_corpus(train, expansion, term)
    assert [d.text for d in corpus.docs] == ["训练句", "扩句一。", "扩句二。", "术语解释"]
    assert [d.doc_id for d in corpus.docs] == ["d000000", "d000001", "d000002", "d000003"]


def test_first_occurrence_keeps_train_origin():
    train = [CorpusDoc(doc_id="t0", text="同一句话", origin=DocOrigin.TRAIN_TARGET)]
    expansion = [CorpusDoc(doc_id="e0", text="同一句话", origin=DocOrigin.TRAIN_EXPANSION)]
    corpus = build_corpus(train, expansion, [])
    assert len(corpus) == 1
    assert corpus.docs[0].origin is DocOrigin.TRAIN_TARGET


def test_build_corpus_idempotent():
    train = [CorpusDoc(doc_id="t0", text="句甲", origin=DocOrigin.TRAIN_TARGET)]
    expansion = [CorpusDoc(doc_id="e0", text="句乙。", origin=DocOrigin.TRAIN_EXPANSION)]
    term = [CorpusDoc(doc_id="x0", text="句丙", origin=DocOrigin.TERM_EXPLANATION)]
    once = build_corpus(train, expansion, term)
    again = build_corpus(*partition_by_origin(once))
    assert once == again


@given(
    st.lists(st.sampled_from(["句甲", "句乙", "句丙", "句丁", "句戊"]), max_size=12),
    st.lists(st.sampled_from(["句甲", "句乙", "句丙", "句丁", "句戊"]), max_size=12),
)
def test_corpus_size_equals_distinct_texts(train_texts, exp_texts):
    train = [
        CorpusDoc(doc_id=f"t{i}", text=t, origin=DocOrigin.TRAIN_TARGET)
        for i, t in enumerate(train_texts)
    ]
    expansion = [
        CorpusDoc(doc_id=f"e{i}", text=t, origin=DocOrigin.TRAIN_EXPANSION)
        for i, t in enumerate(exp_texts)
    ]
    corpus = build_corpus(train, expansion, [])
    assert len(corpus) == len(set(train_texts) | set(exp_texts))


# --- background generation ---

def test_background_reply_becomes_single_doc():
    llm = ScriptedChatBackend(["背景段落。包含两句。"])
    docs = generate_background("源句", llm, source_id="q7")
    assert len(docs) == 1  # paragraph kept whole, not split
    assert docs[0].origin is DocOrigin.BACKGROUND
    assert docs[0].meta == "q7"


def test_background_backend_error_degrades_to_empty():
    llm = ScriptedChatBackend([BackendError("down")])
    assert generate_background("源句", llm) == []


def test_background_docs_keyed_per_source():
    llm = ScriptedChatBackend([f"背景{i}" for i in range(5)])
    docs = []
    for i in range(5):
        docs.extend(generate_background(f"源句{i}", llm, source_id=f"s{i}"))
    grouped = background_map(docs)
    assert set(grouped) == {f"s{i}" for i in range(5)}
    assert grouped["s3"] == ["背景3"]


# --- persistence ---

def test_corpus_roundtrip(tmp_path, worked_corpus):
    path = tmp_path / "corpus.jsonl"
    save_corpus(worked_corpus, path)
    loaded = load_corpus(path)
    assert loaded.docs == worked_corpus.docs


def test_load_terms_skips_blanks(tmp_path):
    path = tmp_path / "terms.txt"
    path.write_text("即期\n\n远期\n  \n掉期\n", encoding="utf-8")
    assert load_terms(path) == ["即期", "远期", "掉期"]
