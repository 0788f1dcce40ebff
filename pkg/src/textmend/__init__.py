"""Retrieval-augmented correction of Chinese text under length constraints.

The package covers the full loop: building a retrieval corpus from
training pairs and domain terms, indexing it with an embedding backend,
mining contrastive training samples for retriever tuning, correcting
text through an LLM with multi-turn length reflection and adaptive
method selection, and scoring the results (CER, sentence P/R/F1,
retrieval hit rates).
"""

from .chars import length_of, nfc
from .config import RunConfig, resolve_config
from .contrastive import (
    ErrorChar,
    RetrieverTrainingSample,
    build_training_sample,
    build_training_samples,
    contrastive_loss,
    contrastive_loss_from_sims,
    corrected_chars,
    extract_error_chars,
    hit_at_k,
    load_samples,
    mrr,
    mrr_for_pairs,
    save_samples,
)
from .corpus import (
    Corpus,
    CorpusDoc,
    DocOrigin,
    background_map,
    build_corpus,
    expand_sentence,
    expand_term,
    generate_background,
    ingest_training_targets,
    load_corpus,
    save_corpus,
    split_sentences,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    EmptyOutputError,
    ExpansionError,
    TextmendError,
    TransientBackendError,
)
from .llm import (
    ChatBackend,
    ChatBackendConfig,
    FunctionChatBackend,
    HttpChatBackend,
    ScriptedChatBackend,
    chat,
)
from .metrics import (
    CERReport,
    EvalItem,
    PRFReport,
    cer,
    cerr,
    edit_distance,
    f1_score,
    length_accuracy,
    round_histogram,
    sentence_prf,
)
from .pipeline import (
    CorrectionResult,
    Method,
    PipelineConfig,
    adaptive_correct,
    correct_batch,
    correct_direct,
    correct_with_retrieval,
    load_predictions,
    save_predictions,
)
from .prompts import render_prompt, render_reflection_prompt
from .reflection import (
    LengthReport,
    ReflectionTrace,
    length_satisfied,
    mlr,
    render_length_report,
)
from .retrieval import (
    EmbedBackend,
    HashEmbedBackend,
    HttpEmbedBackend,
    Retriever,
    SearchHit,
    VectorIndex,
    cosine,
    embed_in_batches,
    index_corpus,
    load_index,
    save_index,
)
from .tasks import (
    CorrectionTask,
    NBestGroup,
    SentencePair,
    TaskKind,
    load_nbest,
    load_pairs,
    load_tasks,
    tasks_from_nbest,
    tasks_from_pairs,
)

__version__ = "0.1.0"
