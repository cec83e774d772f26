"""
Transaction multigraphs and edge sequences
==========================================

A small walk through the data structures: a directed multigraph that keeps
every transaction as its own edge, and the per-node chronological edge
sequences the encoder reads.
"""

import numpy as np

from diam.graph import EdgeRecord, build
from diam.seqgen import build_sequences

# Six accounts.  Account 3 pays account 4 three separate times, so the
# pair (3, 4) carries three parallel edges with their own amounts.
records = [
    EdgeRecord(0, 1, 10.0, (5.0, 10.0)),
    EdgeRecord(1, 2, 20.0, (2.5, 20.0)),
    EdgeRecord(2, 3, 30.0, (1.0, 30.0)),
    EdgeRecord(3, 4, 60.0, (7.0, 60.0)),
    EdgeRecord(3, 4, 40.0, (3.0, 40.0)),
    EdgeRecord(3, 4, 50.0, (4.0, 50.0)),
]
g = build(6, records)
print(g)

# Neighbour lists come back in edge-id order with the multiplicity intact.
print("out of 3:", g.out_neighbors(3))
print("in of 4: ", g.in_neighbors(4))

# Sequences are sorted by timestamp, so edge 3 (t=60) comes last even though
# it was recorded first.  With t_max=2 only the two most recent survive.
s = build_sequences(g, 3, t_max=2)
print("outgoing edge ids of 3:", s.out_edges.tolist())
print(s.x_out)

# Account 5 never transacts.  Both directions get a single zero "self-loop"
# step so the encoder always has something to read.
empty = build_sequences(g, 5, t_max=4)
print("isolated node:", empty.x_in.tolist(), empty.x_out.tolist())

# Degrees count parallel edges separately.
print("out-degree:", g.out_degree().tolist())
print("in-degree: ", g.in_degree().tolist())
assert np.array_equal(g.out_degree(), [1, 1, 1, 3, 0, 0])
