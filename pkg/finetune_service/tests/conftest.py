import json
import random

import pytest

QUERY_POOL = (
    "金融市场交易银行投资风险管理资产负债贷款利率汇率期货现货"
    "证券基金保险理财债券股票收益成本"
)
RARE_POOL = [chr(c) for c in range(0x4E00, 0x9FFF, 211)][:150]
WRONG_POOL = "甲乙丙丁戊己庚辛壬癸"
NEUTRAL_POOL = "审计报告披露监管合规标准流程制度规范条例办法细则指引通知公告文件档案记录"
FILLER_POOL = "天空白云森林山川河流湖泊草原沙漠海洋岛屿冰川峡谷瀑布温泉丘陵平原盆地高原"


def _make_separable(seed: int, n_pairs: int):
    """Build a retrieval problem a character-level model can learn.

    Each pair plants one rare character inside a low-overlap "carrier"
    document while three distractors share the query's five-char stem, so
    an untrained encoder ranks distractors above carriers.  Returns
    (docs, pairs, sample_records) where pairs are (source, target,
    rare_char) with source and target differing at exactly one position.
    """
    rng = random.Random(seed)
    fillers = []
    while len(fillers) < n_pairs:
        text = "".join(rng.choice(FILLER_POOL) for _ in range(8))
        if text not in fillers:
            fillers.append(text)
    docs, pairs, records = [], [], []
    for i in range(n_pairs):
        rare = RARE_POOL[i]
        stem = "".join(rng.choice(QUERY_POOL) for _ in range(5))
        tail = "".join(rng.choice(QUERY_POOL) for _ in range(2))
        source = stem + rng.choice(WRONG_POOL) + tail
        target = stem + rare + tail
        carrier = stem[:3] + rare + "".join(
            rng.choice(NEUTRAL_POOL) for _ in range(4)
        )
        distractors = [
            stem + "".join(rng.choice(QUERY_POOL) for _ in range(3))
            for _ in range(3)
        ]
        docs.append(carrier)
        docs.extend(distractors)
        pairs.append((source, target, rare))
        negatives = distractors + [rng.choice(fillers), rng.choice(fillers)]
        records.append(
            {"query": source, "pos": [target, carrier], "neg": negatives[:5]}
        )
    docs.extend(fillers)
    return docs, pairs, records


@pytest.fixture
def separable_factory():
    return _make_separable


@pytest.fixture
def write_samples(tmp_path):
    def _write(records, name="samples.jsonl", header=None):
        lines = []
        if header is not None:
            lines.append(json.dumps({"_header": header}, ensure_ascii=False))
        lines.extend(json.dumps(r, ensure_ascii=False) for r in records)
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
