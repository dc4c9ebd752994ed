"""
Evolving a recogniser (scaled down)
===================================

Selection keeps genomes whose clean-glyph codes are unique, crossover mixes
the best of them, and refinement resamples the worst output trees until the
network ignores training deformations.  The scaled-down settings from
configs/quick.cfg finish in well under a minute; configs/paper.cfg holds the
full-size run.
"""

from pathlib import Path

from memnet import load_config, load_glyphs, train

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "quick.cfg")
glyphs = load_glyphs()
model = train(cfg.arch, glyphs, cfg.seed, cfg.selection, cfg.genetic, cfg.refine, cfg.value_range)

# The log has one key=value record per stage event.
for line in model.log[:3] + model.log[-2:]:
    print(line)

print(f"converged={model.converged} after {model.iterations} iterations, "
      f"{model.accepted_moves} accepted moves")
print(f"final ABE {model.final_abe:.3f} bits per character, min code spacing {model.min_spacing}")
print(model.codebook.to_text())
