"""
Exemplar retrieval and prompt construction
==========================================

Build a TF-IDF index over a pool, fetch the closest exemplars for a new
input, and render generation and editing prompts from them.
"""

from postedit import (
    RoleKind,
    TaskKind,
    build_generator_prompt,
    build_index,
    build_interpreter_prompt,
    default_templates,
    oracle_actions,
    retrieve_top_k,
    tokenize,
)

pool = [
    (0, "the weather station reports rain"),
    (1, "the station opens at dawn"),
    (2, "fresh bread is sold at the market"),
    (3, "rain flooded the northern market"),
]
index = build_index(pool)

query = "the station reports heavy rain"
for entry_id, score in retrieve_top_k(index, query, k=3):
    print(f"pool entry {entry_id}: cosine {score:.3f}")

templates = default_templates(TaskKind.MT)

# A generation prompt with two demonstrations (closest last is the
# pipeline's default ordering; here we pass them explicitly).
generation = build_generator_prompt(
    query,
    [("src one", "tgt one"), ("src two", "tgt two")],
    templates[RoleKind.GENERATOR],
)
print("\n--- generation prompt ---")
for role, content in generation.messages:
    print(f"[{role}]\n{content}")

# An editing prompt: current output, its edit script, one demonstration.
current = "the station reports rain rain"
script = oracle_actions(tokenize(current), tokenize("the station reports heavy rain"))
demo_script = oracle_actions(tokenize("tgt one extra"), tokenize("tgt one"))
editing = build_interpreter_prompt(
    query,
    current,
    script,
    [("src one", "tgt one extra", demo_script, "tgt one")],
    templates[RoleKind.INTERPRETER_FEW_SHOT],
)
print("\n--- editing prompt ---")
for role, content in editing.messages:
    print(f"[{role}]\n{content}")
