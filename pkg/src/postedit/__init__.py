"""Post-editing of generated text with word-level edit-action scripts.

The package provides the edit-action calculus, TF-IDF exemplar retrieval,
prompt construction, pluggable generation/programming/interpreting
backends, the iterative refinement loop, corpus ingestion and training-set
synthesis, and an evaluation suite (BLEU, ChrF++, action F1, unigram KL).
"""

from .actions import (
    NO_ACTION,
    ActionScript,
    EditAction,
    Op,
    TokenSeq,
    apply_actions,
    corrupt_script,
    detokenize,
    filter_script,
    noaction_rate,
    oracle_actions,
    parse_script,
    serialize_script,
    tokenize,
    unordered_actions,
)
from .backends import (
    BackendConfig,
    BackendResponse,
    BackendTrio,
    DirectEditInterpreter,
    NoisyGenerator,
    OracleProgrammer,
    Recorder,
    RemoteGenerator,
    RemoteInterpreter,
    RemoteProgrammer,
    ReplayBackend,
    derive_seed,
)
from .data import (
    ExamplePair,
    ExemplarPool,
    ExemplarQuad,
    PairPool,
    TrainingInstance,
    build_pool,
    build_training_set,
    export_training_set,
    ingest,
    load_pool,
    load_training_set,
    save_pool,
)
from .metrics import MetricsReport, action_f1, chrf_pp, corpus_bleu, unigram_kl
from .pipeline import (
    RefinementState,
    RunConfig,
    RunReport,
    generate_initial,
    refine_step,
    run,
)
from .prompts import (
    PromptTemplate,
    RenderedPrompt,
    RoleKind,
    TaskKind,
    build_generator_prompt,
    build_interpreter_prompt,
    default_templates,
    dump_template,
    load_template,
)
from .retrieval import TfIdfIndex, build_index, cosine, retrieve_top_k

__version__ = "0.1.0"
