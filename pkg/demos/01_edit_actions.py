"""
Edit-action calculus walkthrough
================================

Extract a minimal word-level script between an imperfect output and its
reference, apply it back, serialize it for a model, and corrupt it the
way adversarial in-context demonstrations do.
"""

from postedit import (
    apply_actions,
    corrupt_script,
    detokenize,
    oracle_actions,
    parse_script,
    serialize_script,
    tokenize,
    unordered_actions,
)

hypothesis = tokenize("the cat sat on mat")
reference = tokenize("the dog sat on the mat")

# The minimal insert/delete script, with positions into the hypothesis.
script = oracle_actions(hypothesis, reference)
print("script (positional):", serialize_script(script, with_positions=True))
print("script (for models):", serialize_script(script))

# Applying it reproduces the reference exactly.
print("applied:", detokenize(apply_actions(hypothesis, script)))

# The wire grammar round-trips.
assert parse_script(serialize_script(script, with_positions=True)) == script

# Equal texts need no refinement; that is a distinguished value.
print("equal texts:", serialize_script(oracle_actions(reference, reference)))

# Bag-of-words scripts ignore order (and lose the ability to place words).
print("unordered:", serialize_script(unordered_actions(hypothesis, reference)))

# Corruption drops or swaps actions at a rate, reproducibly per seed.
donors = list(script)
for seed in (1, 2, 3):
    corrupted = corrupt_script(script, rate=0.5, pool=donors, seed=seed)
    print(f"corrupted (seed={seed}):", serialize_script(corrupted) or "<all dropped>")
