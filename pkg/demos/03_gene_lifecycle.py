"""Follow one useless gene from deployment to deletion.

A gene nobody's requests can use ages at every request, then spends its
escape budget wandering to neighbouring habitats (moves, never copies), and
is finally deleted. A gene that keeps appearing in solutions lives forever.
"""

import json

from ecodec import Gene, build_ecosystem, parse_scenario, step
from ecodec.habitat import deploy_gene

scenario = parse_scenario(json.dumps({
    "version": "ecodec-scenario/1",
    "communities": {"count": 1, "vocab_size": 6},
    "users_per_community": 4,
    "genes_per_user": 3,
    "request_size_range": [2, 3],
    "vocabulary_size": 8,   # attributes 6 and 7 belong to no community
}))
ecosystem = build_ecosystem(scenario, seed=11)

useless = Gene(ecosystem.new_gene_id(), frozenset({6, 7}), 1.0, origin_habitat=0)
deploy_gene(ecosystem.habitats[0], useless, ecosystem,
            ecosystem.rng.stream("habitat", 0))
print(f"planted gene {useless.gene_id} providing {sorted(useless.provides)} - "
      f"attributes no request will ever want\n")

watermark = len(ecosystem.event_log)
for tick in range(1, 201):
    step(ecosystem)
    for event in ecosystem.event_log[watermark:]:
        if event.get("gene") != useless.gene_id:
            continue
        if event["type"] == "pool_remove" and event["reason"] == "escape":
            print(f"tick {tick:3d}: escaped habitat {event['habitat']} "
                  f"-> habitat {event['target']}")
        elif event["type"] == "pool_remove" and event["reason"] == "deleted":
            print(f"tick {tick:3d}: deleted at habitat {event['habitat']}")
    watermark = len(ecosystem.event_log)
    holders = [h for h in ecosystem.habitats
               if useless.gene_id in ecosystem.habitats[h].gene_pool]
    if not holders:
        print(f"\ngone from every habitat by tick {tick}")
        break

print("\nsurviving gene copies per habitat (community genes live on):")
for habitat_id, habitat in sorted(ecosystem.habitats.items()):
    print(f"  habitat {habitat_id}: {sorted(habitat.gene_pool)}")
