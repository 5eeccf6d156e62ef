"""
Iterative refinement with deterministic offline backends
========================================================

A complete run without any remote model: a noisy generator produces
imperfect initial outputs, the oracle programmer reads the exact edit
scripts off the references, and the direct-edit interpreter applies them
positionally.  One refinement step restores every reference; the second
step finds nothing left to do and the loop stops.
"""

from postedit import (
    BackendTrio,
    DirectEditInterpreter,
    ExamplePair,
    ExemplarPool,
    NoisyGenerator,
    OracleProgrammer,
    RunConfig,
    build_pool,
    run,
)

references = {
    f"input {i} about item{i % 4}": f"item{i % 4} sentence number {i} with common tail"
    for i in range(12)
}
pairs = [ExamplePair(i, x, y) for i, (x, y) in enumerate(references.items())]

config = RunConfig(seed=42, interpreter_shots=3, generator_shots=2)

# The exemplar pool pairs each input with an imperfect generation and the
# oracle script that repairs it.
pool_generator = NoisyGenerator(references, noise=0.4, seed=42)
pool = ExemplarPool(build_pool(pairs, pool_generator, config))

trio = BackendTrio(
    generator=NoisyGenerator(references, noise=0.4, seed=7),
    programmer=OracleProgrammer(references),
    interpreter=DirectEditInterpreter(),
)
report = run(
    list(references), pool, trio, config, references=list(references.values())
)

for row in report.iterations:
    rate = row["noaction_rate"]
    rate_text = f"{100 * rate:5.1f}%" if rate is not None else "    -"
    print(
        f"iteration {row['iteration']}: NoAction {rate_text}  "
        f"BLEU {row['metrics']['bleu']:6.2f}  ChrF++ {row['metrics']['chrfpp']:6.2f}"
    )

print("\nper-instance history of instance 0:")
for entry in report.instances[0]["history"]:
    print(f"  i={entry['iteration']}: {entry['text']!r}")
    if entry["actions"]:
        print(f"      via {entry['actions']}")
