"""Acceptance gate: one test per shipping criterion.

Every test prints a single PASS/FAIL verdict line on the real stdout
(bypassing pytest capture) and then asserts, so a red run still reports
the verdict for every criterion.
"""
import json
import math
import random
import time
import unicodedata

import numpy as np

from textmend.cli import run_command
from textmend.contrastive import (
    build_training_sample,
    contrastive_loss,
    contrastive_loss_from_sims,
    corrected_chars,
)
from textmend.corpus import Corpus, CorpusDoc, DocOrigin
from textmend.fileio import read_jsonl
from textmend.llm import ScriptedChatBackend, chat
from textmend.metrics import cerr, edit_distance, f1_score, length_satisfies
from textmend.pipeline import Method, PipelineConfig, adaptive_correct
from textmend.prompts import render_prompt
from textmend.reflection import length_satisfied, mlr
from textmend.retrieval import HashEmbedBackend, VectorIndex, cosine, index_corpus
from textmend.tasks import CorrectionTask, SentencePair, TaskKind


def _verdict(capsys, ok: bool, label: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {label} -- {detail}"
    with capsys.disabled():
        print(line)
    assert ok, line


# Mixed pool for random-string generation: CJK, ASCII letters, digits, and a
# combining accent so NFC normalization is actually exercised.
CHAR_POOL = "天气很好像夏汽交易现汇外即期指数abcdeXYZ09" + "é"

X7 = "天汽很好像夏天"  # 7-char source with one misspelled char
OK7 = "天气很好像夏天"  # 7-char corrected sentence
BAD = "长度不对"  # 4 chars, never satisfies a 7-char budget


def _rand_text(rng: random.Random, lo: int, hi: int) -> str:
    return "".join(rng.choice(CHAR_POOL) for _ in range(rng.randint(lo, hi)))


def test_metric_formula_reproduction(capsys):
    checks = [
        ("cerr(5.84, 4.15)", 100 * cerr(5.84, 4.15), 28.9, 0.1),
        ("cerr(5.84, 9.84)", 100 * cerr(5.84, 9.84), -68.5, 0.1),
        ("f1(P=73.1, R=60.4)", f1_score(73.1, 60.4), 66.1, 0.1),
        ("f1(P=61.8, R=44.9)", f1_score(61.8, 44.9), 52.0, 0.1),
    ]
    ok = all(abs(got - want) <= tol for _, got, want, tol in checks)
    detail = "; ".join(
        f"{name} = {got:.2f} (want {want} +/-{tol})" for name, got, want, tol in checks
    )
    _verdict(capsys, ok, "metric formulas", detail)


def _lev_oracle(a: str, b: str) -> int:
    """Edit distance straight from the recursive definition, memoized."""
    memo: dict = {}

    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        if (i, j) not in memo:
            sub = d(i - 1, j - 1) + (a[i - 1] != b[j - 1])
            memo[i, j] = min(d(i - 1, j) + 1, d(i, j - 1) + 1, sub)
        return memo[i, j]

    return d(len(a), len(b))


def test_edit_distance_against_recursive_oracle(capsys):
    rng = random.Random(20260814)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(10_000):
        a = _rand_text(rng, 0, 8)
        b = _rand_text(rng, 0, 8)
        na = unicodedata.normalize("NFC", a)
        nb = unicodedata.normalize("NFC", b)
        if edit_distance(a, b) != _lev_oracle(na, nb):
            mismatches += 1
    axiom_failures = 0
    for _ in range(1_000):
        a, b, c = (_rand_text(rng, 0, 8) for _ in range(3))
        dab = edit_distance(a, b)
        if dab != edit_distance(b, a):
            axiom_failures += 1
        if edit_distance(a, c) > dab + edit_distance(b, c):
            axiom_failures += 1
        if edit_distance(a, a) != 0:
            axiom_failures += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and axiom_failures == 0 and elapsed < 30.0
    _verdict(
        capsys,
        ok,
        "edit-distance oracle",
        f"10000 pairs, {mismatches} mismatches; 1000 triples, "
        f"{axiom_failures} axiom failures; {elapsed:.1f}s (budget 30s)",
    )


def test_search_matches_brute_force(capsys):
    rng = np.random.default_rng(7)
    docs = rng.normal(size=(200, 64))
    ids = [f"d{i:03d}" for i in range(200)]
    index = VectorIndex(ids, docs)
    norms = [math.sqrt(sum(float(v) ** 2 for v in row)) for row in docs]
    start = time.perf_counter()
    disagreements = 0
    for _ in range(100):
        q = rng.normal(size=64)
        qnorm = math.sqrt(sum(float(v) ** 2 for v in q))
        scores = [
            sum(float(x) * float(y) for x, y in zip(row, q)) / (n * qnorm)
            for row, n in zip(docs, norms)
        ]
        want = [
            ids[i]
            for i in sorted(range(200), key=lambda i: (-scores[i], i))[:5]
        ]
        got = [hit.doc_id for hit in index.search(q, 5)]
        if got != want:
            disagreements += 1
    elapsed = time.perf_counter() - start
    ok = disagreements == 0 and elapsed < 5.0
    _verdict(
        capsys,
        ok,
        "top-5 retrieval oracle",
        f"100 queries over 200x64 vectors, {disagreements} disagreements; "
        f"{elapsed:.1f}s (budget 5s)",
    )


def test_contrastive_loss_pinned_values_and_monotonicity(capsys):
    zero = contrastive_loss_from_sims([0.37, -0.2], [])
    pinned = contrastive_loss(
        np.array([1.0, 0.0]),
        [np.array([2.0, 0.0])],
        [np.array([0.0, 3.0])],
        tau=0.2,
    )
    want = math.log1p(math.exp(-5.0))
    pinned_err = abs(pinned - want)

    rng = random.Random(99)
    violations = 0
    for _ in range(1_000):
        pos = [rng.uniform(-1.0, 0.89) for _ in range(rng.randint(1, 4))]
        neg = [rng.uniform(-1.0, 0.89) for _ in range(rng.randint(1, 6))]
        base = contrastive_loss_from_sims(pos, neg)
        bumped_pos = list(pos)
        bumped_pos[rng.randrange(len(pos))] += rng.uniform(0.01, 0.1)
        if not contrastive_loss_from_sims(bumped_pos, neg) < base:
            violations += 1
        bumped_neg = list(neg)
        bumped_neg[rng.randrange(len(neg))] += rng.uniform(0.01, 0.1)
        if not contrastive_loss_from_sims(pos, bumped_neg) > base:
            violations += 1
    ok = zero == 0.0 and pinned_err <= 1e-9 and violations == 0
    _verdict(
        capsys,
        ok,
        "contrastive loss",
        f"zero-negative = {zero!r}; |pinned - ln(1+e^-5)| = {pinned_err:.2e}; "
        f"{violations} monotonicity violations in 1000 configs",
    )


def test_reflection_loop_behavior(capsys):
    task = CorrectionTask(id="a1", kind=TaskKind.SPELLING, x=X7)

    llm = ScriptedChatBackend([BAD, BAD, OK7])
    y0 = chat(render_prompt(task), llm, backoff_base=0.0)
    trace = mlr(task, y0, 4, llm, backoff_base=0.0)
    early_ok = (
        trace.rounds_used == 2
        and trace.satisfied
        and trace.final == OK7
        and length_satisfied(task, trace.final)
    )

    wrongs = ["错一", "错误二啊", "三个错误啦", "第四个错误答", "不可见的第五条啦"]
    llm2 = ScriptedChatBackend(wrongs, exhaustion="error")
    trace2 = mlr(task, "初始输出长度不对", 4, llm2, backoff_base=0.0)
    exhaust_ok = (
        llm2.calls == 4
        and trace2.final == wrongs[3]
        and not trace2.satisfied
        and trace2.rounds_used == 4
        and trace2.error is None
    )
    ok = early_ok and exhaust_ok
    _verdict(
        capsys,
        ok,
        "length-reflection loop",
        f"(wrong,wrong,right) -> rounds_used={trace.rounds_used}, satisfied="
        f"{trace.satisfied}; all-wrong m=4 -> {llm2.calls} calls, last reply "
        f"returned={trace2.final == wrongs[3]}",
    )


def test_adaptive_selection_swap_and_single_switch(capsys):
    cfg = PipelineConfig(mlr_rounds=2, adse_limit=2)
    context = ["天气很好像夏天的参考句"]

    with_set = CorrectionTask(
        id="s1", kind=TaskKind.SPELLING, x=X7, has_training_set=True
    )
    llm_a = ScriptedChatBackend([OK7])
    r_with = adaptive_correct(with_set, llm_a, context, cfg, backoff_base=0.0)
    without = CorrectionTask(
        id="s2", kind=TaskKind.SPELLING, x=X7, has_training_set=False
    )
    llm_b = ScriptedChatBackend([OK7])
    r_without = adaptive_correct(without, llm_b, context, cfg, backoff_base=0.0)
    swap_ok = (
        r_with.method == Method.RETRIEVAL
        and not r_with.switched
        and context[0] in llm_a.prompts[0]
        and r_without.method == Method.DIRECT
        and not r_without.switched
        and context[0] not in llm_b.prompts[0]
    )

    never = ScriptedChatBackend([BAD], exhaustion="repeat_last")
    alt = ScriptedChatBackend(["备选错误答"], exhaustion="repeat_last")
    r_switch = adaptive_correct(
        with_set, never, context, cfg, llm_alternative=alt, backoff_base=0.0
    )
    per_attempt = 1 + cfg.mlr_rounds
    switch_ok = (
        r_switch.switched
        and r_switch.method == Method.DIRECT
        and never.calls == cfg.adse_limit * per_attempt
        and alt.calls == per_attempt  # one alternative attempt, no bounce-back
        and r_switch.output == "备选错误答"  # returned unconditionally
    )
    ok = swap_ok and switch_ok
    _verdict(
        capsys,
        ok,
        "adaptive selection",
        f"first method with/without training set = {r_with.method.value}/"
        f"{r_without.method.value}; never-satisfying first method -> "
        f"switched={r_switch.switched}, first-method calls={never.calls}, "
        f"alternative calls={alt.calls}",
    )


def test_length_predicate_fuzz(capsys):
    rng = random.Random(424242)

    def nfc_len(s: str) -> int:
        return len(unicodedata.normalize("NFC", s))

    failures = 0
    checked = 0
    for _ in range(5_000):
        x = _rand_text(rng, 1, 10)
        y = _rand_text(rng, 0, 12)
        spelling = length_satisfies(TaskKind.SPELLING, x, y)
        splitting = length_satisfies(TaskKind.SPLITTING, x, y)
        if spelling != (nfc_len(y) == nfc_len(x)):
            failures += 1
        if splitting != (nfc_len(y) <= nfc_len(x)):
            failures += 1
        if spelling and not splitting:
            failures += 1
        checked += 1
    for _ in range(5_000):
        cands = tuple(_rand_text(rng, 1, 10) for _ in range(rng.randint(1, 6)))
        y = _rand_text(rng, 0, 12)
        lens = [nfc_len(c) for c in cands]
        want = min(lens) <= nfc_len(y) <= max(lens)
        if length_satisfies(TaskKind.NBEST, cands, y) != want:
            failures += 1
        checked += 1
    ok = failures == 0 and checked == 10_000
    _verdict(
        capsys,
        ok,
        "length predicates",
        f"{checked} fuzz triples, {failures} failures "
        "(equal-length, shrink-only, and candidate min/max bounds)",
    )


def test_end_to_end_determinism(tmp_path, capsys):
    rng = random.Random(5)
    pool = "金融市场交易银行投资风险管理资产负债贷款利率汇率期货现货"
    records = []
    for i in range(50):
        n = rng.randint(4, 9)
        target = "".join(rng.choice(pool) for _ in range(n))
        source = "错" + target[1:] if rng.random() < 0.7 else target
        records.append(
            {"id": f"t{i:02d}", "source": source, "target": target, "task": "spelling"}
        )
    dataset = tmp_path / "data.jsonl"
    dataset.write_text(
        "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n",
        encoding="utf-8",
    )
    script = tmp_path / "replies.txt"
    # 9-char then 6-char replies: some items satisfy immediately, some after
    # one reflection, the rest exhaust and switch methods.
    script.write_text("市场交易风险管理利\n银行投资贷款\n", encoding="utf-8")

    corpus_path = tmp_path / "corpus.jsonl"
    assert run_command(
        ["build-corpus", "--pairs", str(dataset), "--no-expand",
         "--out", str(corpus_path), "--seed", "11"]
    ) == 0
    index_path = tmp_path / "index.jsonl"
    assert run_command(
        ["index", "--corpus", str(corpus_path), "--out", str(index_path),
         "--embed-dim", "32", "--seed", "11"]
    ) == 0

    outs = []
    codes = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        codes.append(
            run_command(
                ["correct", "--dataset", str(dataset), "--task", "spelling",
                 "--mode", "adaptive", "--corpus", str(corpus_path),
                 "--index", str(index_path), "--mock-script", str(script),
                 "--seed", "11", "--rounds", "2", "--adse-limit", "2",
                 "--out", str(out)]
            )
        )
        outs.append(out.read_bytes())
    _, preds = read_jsonl(tmp_path / "a.jsonl")
    ok = (
        codes == [0, 0]
        and outs[0] == outs[1]
        and len(preds) == 50
    )
    _verdict(
        capsys,
        ok,
        "end-to-end determinism",
        f"two correct runs on 50 items: exit codes {codes}, "
        f"byte-identical={outs[0] == outs[1]}",
    )


def test_training_sample_mining_with_filter_oracle(capsys):
    pair = SentencePair(
        id="w1",
        source="机器外汇交易也称现汇交易",
        target="即期外汇交易也称现汇交易",
        task=TaskKind.SPELLING,
    )
    corrected = corrected_chars(pair)  # 即 and 期

    rng = random.Random(13)
    texts = [
        pair.target,
        "即时发布产品投资报价",
        "沪深300指数期货主力合约",
        "现汇交易具有高流动性",
        "我国对外汇实行管制",
    ]
    # Filler docs drawn from a pool that contains neither corrected char.
    safe_pool = "市场交易银行投资风险管理资产贷款利率现货金融报告分析客户服务系统数据平台网络安全"
    assert not any(c in safe_pool for c in corrected)
    while len(texts) < 50:
        t = "".join(rng.choice(safe_pool) for _ in range(rng.randint(6, 12)))
        if t not in texts:
            texts.append(t)
    docs = [
        CorpusDoc(f"d{i:06d}", t, DocOrigin.TRAIN_TARGET) for i, t in enumerate(texts)
    ]
    corpus = Corpus(tuple(docs), domain_tag="finance")
    embed = HashEmbedBackend(dim=64, seed=3)
    index = index_corpus(corpus, embed)
    sample = build_training_sample(pair, corpus, index, embed, n_neg=5, seed=3)

    has_target = pair.target in sample.positives

    # Exhaustive filter oracle: for each corrected char, scan every doc,
    # keep the ones containing the char (minus the query/target sentences
    # and docs already claimed), and demand the best-scoring survivor.
    query_vec = embed.embed([pair.source])[0]
    scores = {d.doc_id: cosine(query_vec, index.vector_for(d.doc_id)) for d in docs}
    ranked_docs = sorted(docs, key=lambda d: -scores[d.doc_id])
    per_char_ok = True
    taken = {pair.source, pair.target}
    for char in corrected:
        survivors = [
            d.text for d in ranked_docs if char in d.text and d.text not in taken
        ]
        if survivors:
            if survivors[0] not in sample.positives:
                per_char_ok = False
            taken.add(survivors[0])

    clean_texts = {
        d.text
        for d in docs
        if not any(c in d.text for c in corrected) and d.text != pair.source
    }
    negatives_clean = all(
        all(c not in neg for c in corrected) for neg in sample.negatives
    )
    negatives_from_pool = set(sample.negatives) <= clean_texts
    filled = len(sample.negatives) == 5 and not sample.underfilled

    ok = (
        has_target
        and per_char_ok
        and negatives_clean
        and negatives_from_pool
        and filled
    )
    _verdict(
        capsys,
        ok,
        "training-sample mining",
        f"positives={len(sample.positives)} (target included={has_target}, "
        f"per-corrected-char doc ok={per_char_ok}); negatives="
        f"{len(sample.negatives)}, none contains a corrected char="
        f"{negatives_clean}",
    )
