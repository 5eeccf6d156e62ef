"""
Training-set synthesis and evaluation metrics
=============================================

Turn an exemplar pool into programmer training data (input/target pairs
in the frozen wire format), then score texts with the evaluation suite.
"""

from postedit import (
    ExamplePair,
    ExemplarQuad,
    action_f1,
    build_training_set,
    chrf_pp,
    corpus_bleu,
    oracle_actions,
    tokenize,
    unigram_kl,
)

quads = [
    ExemplarQuad.create(ExamplePair(0, "input zero", "the dog sat"), "the cat sat"),
    ExemplarQuad.create(ExamplePair(1, "input one", "all fine here"), "all fine here"),
    ExemplarQuad.create(ExamplePair(2, "input two", "short text"), "short"),
]

instances = build_training_set(quads, noaction_augment_count=2, seed=5)
for instance in instances:
    print(f"input : {instance.input}")
    print(f"target: {instance.target}\n")

hyps = ["the cat sat on the mat", "rain falls in the north"]
refs = ["the dog sat on the mat", "rain falls across the north"]
print(f"corpus BLEU : {corpus_bleu(hyps, refs):.2f}")
print(f"ChrF++      : {chrf_pp(hyps, refs):.2f}")
print(f"unigram KL  : {unigram_kl(hyps, refs):.4f}")

predicted = oracle_actions(tokenize(hyps[0]), tokenize(refs[0]))
reference = oracle_actions(tokenize(hyps[0]), tokenize(refs[0]))
precision, recall, f1 = action_f1(predicted, reference)
print(f"action F1 of a perfect prediction: {f1:.2f}")
