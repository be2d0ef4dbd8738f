"""How connection probabilities adapt: reinforcement, decay, creation, pruning.

Links that carry material which ends up in executed solutions strengthen
toward 1; links whose deliveries go unused decay geometrically and are pruned
below 0.01. Executing a solution whose provenance names an unconnected
habitat creates a direct link at p_init - the multi-hop shortcut.
"""

import numpy as np

from ecodec import Gene, GeneSet, Request
from ecodec.ecosystem import Ecosystem
from ecodec.habitat import (
    Connection,
    Habitat,
    deploy_gene,
    execution_feedback,
    hebbian_decay,
    hebbian_reinforce,
    register_geneset,
)
from ecodec.params import Params
from ecodec.rng import RandomSource

print("reinforcement from p=0.1 (closed form 1-(1-p0)*0.9^n):")
connection = Connection(target=1, probability=0.1)
for n in range(1, 31):
    connection = hebbian_reinforce(connection)
    if n in (1, 5, 10, 20, 30):
        closed = 1.0 - 0.9 * 0.9 ** n
        print(f"  after {n:2d} reinforcements: p={connection.probability:.6f} "
              f"(closed form {closed:.6f})")

print("\ndecay from p=0.5 until the prune signal fires:")
connection = Connection(target=1, probability=0.5)
decays = 0
while True:
    connection, prune = hebbian_decay(connection)
    decays += 1
    if prune:
        break
print(f"  pruned after {decays} decays at p={connection.probability:.5f}")

# Multi-hop shortcut: habitat 0 executes a solution evolved at habitat 2,
# reachable so far only through habitat 1.
ecosystem = Ecosystem(Params(), RandomSource(0))
for habitat_id in range(3):
    ecosystem.habitats[habitat_id] = Habitat(habitat_id, habitat_id)
ecosystem.habitats[0].connections[1] = Connection(1, 0.4)

gene = Gene(0, frozenset({1, 2}), 1.0, origin_habitat=0)
deploy_gene(ecosystem.habitats[0], gene, ecosystem, np.random.default_rng(0))

request = Request({1: 1.0, 2: 1.0}, issuer=0)
solution = GeneSet(members={0}, provenance={0, 2})  # partly evolved at habitat 2
register_geneset(ecosystem.habitats[0], solution, request, ecosystem)
print("\nconnections of habitat 0 before execution:",
      {t: round(c.probability, 3) for t, c in ecosystem.habitats[0].connections.items()})
execution_feedback(ecosystem.habitats[0], solution, request, ecosystem,
                   np.random.default_rng(1))
print("connections of habitat 0 after execution: ",
      {t: round(c.probability, 3) for t, c in ecosystem.habitats[0].connections.items()})
print("a direct link to the creating habitat 2 now exists at p_init.")
