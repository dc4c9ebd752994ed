"""
Recognition accuracy and resistor faults
========================================

A trained genome is evaluated on freshly deformed alphabets, then again with
a growing fraction of its resistors failed open.
"""

from memnet import (PAPER_ARCH, TRAIN_DIST, GeneticConfig, RefineConfig, SelectionConfig,
                    TestProtocol, evaluate, fault_sweep, load_glyphs, train)

glyphs = load_glyphs()
model = train(PAPER_ARCH, glyphs, seed=7,
              selection=SelectionConfig(pool_target=20, trials_per_char=2),
              genetic=GeneticConfig(offspring=40),
              refine=RefineConfig(max_iters=200))
# 200 refinement steps are far too few for a robust recogniser; the point
# here is the shape of the fault curve, not the absolute accuracy.
print(f"codes unique: {model.codebook.is_unique}, spacing {model.min_spacing}")

# Evaluate on the training distribution (mild) before faults.
mild = TestProtocol(TRAIN_DIST, n_sets=50)
report = evaluate(model, glyphs, mild, seed=1)
print(report.to_text().split("\n\n")[0])

# Open-circuit faults at increasing rates, three independent draws each.
for row in fault_sweep(model, glyphs, mild, rates=[0.0, 0.01, 0.05, 0.2], reps=3, seed=1):
    print(f"rate {row.rate:5.2f}  accuracy {row.mean_acc:.3f} +- {row.std_acc:.3f}")
