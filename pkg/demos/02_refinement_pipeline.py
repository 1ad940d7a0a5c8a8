"""
Refinement trees and the perception pipeline
============================================

A sign is first seen as an unknown object, then as a sign family, and
only near the vehicle as a concrete sign. The tree below encodes that,
and the compiler turns it into environment assumptions.
"""
from gr1perception import compile_persistence, partition
from gr1perception import expr as E
from gr1perception.refinement import compile_pipeline, load_tree, sign_cells
from gr1perception.scenarios import FIXTURE_DIR

signs = load_tree(FIXTURE_DIR / "sign_tree.json")
print(signs.to_dot())

p = partition(signs)
print("ground labels: ", sorted(p.ground))
print("derived labels:", sorted(p.derived))

# Once a label is seen it stays, or is replaced by something more specific.
for f in compile_persistence(signs):
    print("  ", E.to_text(f))

# Seven cells ahead of the vehicle; far cells can only hold coarse labels.
cells = sign_cells(signs)
for c in cells:
    print(c.name, c.domain)

rules = compile_pipeline(cells, signs)
print(len(rules), "pipeline rules, e.g.")
for f in rules[:4]:
    print("  ", E.to_text(f))

# Behind an occluder a cell may turn empty again, so that rule is dropped.
print("with occlusion:", len(compile_pipeline(cells, signs, occlusion=True)))
