"""Marginals, potential functions, and the convex-order feasibility check.

A sequence of marginal laws supports a martingale only if consecutive laws
increase in convex order. For discrete laws with equal means this reduces to
pointwise dominance of the potentials U(k) = E|X - k|, checked at the atoms.
"""

import numpy as np

from motbounds import (
    DiscreteMeasure,
    MarginalSequence,
    convex_order_check,
    potential,
    quantize_lognormal,
    split_atom,
    validate_sequence,
)

# Start from a point mass and fan out by mean-preserving spreads: each spread
# moves an atom to x - h and x + h with half its weight, which always
# increases the convex order.
mu1 = DiscreteMeasure.point(0.0)
mu2 = split_atom(mu1, 0, 1.0)              # -> half mass at -1 and +1
mu3 = split_atom(split_atom(mu2, 0, 1.0), 2, 1.0)  # spread both atoms again

print("mu1 atoms:", mu1.atoms, "weights:", mu1.weights)
print("mu2 atoms:", mu2.atoms, "weights:", mu2.weights)
print("mu3 atoms:", mu3.atoms, "weights:", mu3.weights)
print("means:", mu1.mean, mu2.mean, mu3.mean)

# The potentials grow with each spread; dominance at every atom certifies
# the convex order.
ks = np.linspace(-3, 3, 7)
print("\nk grid:        ", ks)
print("potential mu1: ", potential(mu1, ks))
print("potential mu2: ", potential(mu2, ks))
print("potential mu3: ", potential(mu3, ks))

print("\nmu1 <= mu2 in convex order:", convex_order_check(mu1, mu2).ordered)
print("mu2 <= mu3 in convex order:", convex_order_check(mu2, mu3).ordered)

# Reversing a pair fails with a witness point where dominance breaks.
bad = convex_order_check(mu2, mu1)
print("\nreversed pair ordered:", bad.ordered, "| reason:", bad.reason,
      "| witness k:", bad.witness_k)

# Whole-sequence validation is what the solvers require before running.
report = validate_sequence(MarginalSequence([mu1, mu2, mu3]))
print("\nsequence valid:", report.ok)

# Continuous laws enter through conditional-mean quantization, which keeps
# the mean exact (a martingale necessity). Unit-mean lognormals with growing
# volatility form a feasible sequence once quantized.
scales = (0.1, 0.2, 0.3)
lognormals = [quantize_lognormal(-s**2 / 2, s, 10) for s in scales]
for s, m in zip(scales, lognormals):
    print(f"\nlognormal scale {s}: mean {m.mean:.12f}")
    print("  atoms:", np.round(m.atoms, 4))
ln_report = validate_sequence(MarginalSequence(lognormals))
print("\nquantized lognormal sequence valid:", ln_report.ok)
