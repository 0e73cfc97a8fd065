"""Smoke test for the fedcross Python bindings.

Build and install first:  maturin develop -m crates/py/Cargo.toml
"""

import math

import fedcross

assert fedcross.split_dataset(32)[0] == list(range(19))
assert abs(sum(fedcross.client_weights([19, 48, 30, 122])) - 1.0) < 1e-12
assert round(fedcross.global_average([90.31, 85.96, 85.09, 90.29]), 2) == 87.91
assert math.isclose(fedcross.poly_lr(0, 0.01, 100, 0.9), 0.01)
assert fedcross.dice([1, 1, 0], [1, 0, 0]) == 2 / 3
assert fedcross.asd([0] * 16, [1] + [0] * 15, 4, 4, (1.0, 1.0)) is None

plan = fedcross.Plan("""
[federation]
sizes = [12, 14, 16]
image_size = 8
[training]
budget = 4
hidden = [6]
""")
fed = plan.federation(1)
assert len(fed) == 3 and fed.shape() == (8, 8)

avg = plan.run("FEDAVG", fed, 1)
cross = plan.run("fedcross", fed, 1)
assert avg.message_count() == 2 * 3 * 4
assert cross.aggregation_events() == 0
assert cross.strategy == "FEDCROSS" and len(cross.losses()) == 4

dsc, per_client = plan.evaluate(cross, fed)
assert 0.0 <= dsc <= 1.0 and len(per_client) == 3

params = cross.final_params()[0]
probs = plan.predict(params, fed.image(0, 0), 8, 8)
assert len(probs) == 64 and all(0.0 <= p <= 1.0 for p in probs)

mean = fedcross.aggregate_fedavg([params, params], [0.5, 0.5])
assert mean.values() == params.values()

try:
    fedcross.Plan("[training]\nbugdet = 1")
except ValueError:
    pass
else:
    raise AssertionError("typo in config accepted")

print(f"ok: FedCross global DSC {dsc:.3f}, {len(params)} parameters")
