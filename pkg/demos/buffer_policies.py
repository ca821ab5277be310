"""
What a finite pair buffer remembers
===================================

Four stream-oblivious buffer policies, replayed many times over the same
stream positions. Only indices are simulated: the policies never look at
the data, so the slot law is a property of the policy alone.
"""

import numpy as np

from pairstream.sampling import (
    exact_pattern_law,
    pattern_distribution,
    simulate_buffers,
    simulate_patterns,
)

s, steps, trials = 4, 19, 100_000

# Which stream index sits in each slot after 19 arrivals?
for policy in ["FIFO", "RS", "RSX", "RSX2"]:
    slots = simulate_buffers(policy, s, steps, trials, seed=1)
    freq = np.bincount(slots.ravel() - 1, minlength=steps) / slots.size
    print(f"{policy:5s}", " ".join(f"{p:.3f}" for p in freq))

# FIFO keeps the last four points, RS a uniform sample without replacement,
# RS-x (and RS-x2) four independent uniform draws, duplicates allowed.
slots = simulate_buffers("RSX", s, steps, trials, seed=2)
dup = np.mean([len(set(row)) < s for row in slots[:2000]])
expected = 1 - np.prod(1 - np.arange(s) / steps)
print(f"RSX buffers holding a duplicate: {dup:.3f} (independent draws: {expected:.3f})")

# One step later, which slots get overwritten by the newcomer? Both RS-x
# variants follow the same product law, RS-x2 with fewer random draws.
t = s + 1 + 1
law = exact_pattern_law(s, t)
for policy in ["RSX", "RSX2"]:
    emp = pattern_distribution(simulate_patterns(policy, s, t, trials, seed=3))
    print(f"{policy} max deviation from the product law: {np.abs(emp - law).max():.4f}")
