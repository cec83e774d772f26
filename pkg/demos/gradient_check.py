"""
Checking gradients by finite differences
========================================

The model is trained with a hand-written reverse-mode tape.  Here we compare
its gradients with central differences on a 20-node graph, block by block,
and show that an absurdly tight tolerance is (correctly) reported as a
failure.
"""

from diam import gradcheck

report = gradcheck.run(seed=0, coords_per_block=100)
for block, (n, worst) in report.per_block().items():
    print(f"{block:14s} {n:4d} coords  worst rel err {worst:.1e}")
print("passed:", report.passed, f"({report.seconds:.1f}s)")

# Finite differences carry roughly 1e-10 of round-off noise, so a 1e-9
# tolerance flags coordinates even though the gradient is right.
strict = gradcheck.run(seed=0, coords_per_block=10, tolerance=1e-9)
print("at 1e-9:", len(strict.failures), "of", len(strict.coords), "coordinates flagged")
for c in strict.worst(3):
    print(f"  {c.block}{list(c.index)}  analytic {c.analytic:+.8e}  numeric {c.numeric:+.8e}")
