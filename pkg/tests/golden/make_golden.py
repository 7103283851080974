"""Regenerate ct1.json from the oracle: ``python tests/golden/make_golden.py``."""

import json
from pathlib import Path

from fkjump import zoo
from fkjump.models import Mesh
from fkjump.oracle import ct_exact_flow, mesh_flow_path

TIMES = ["0", "0.25", "0.5", "1", "1.5", "2"]


def build():
    model = zoo.ct1()
    exact = {t: dict(zip(("mass", "mu"), ct_exact_flow(model, t))) for t in TIMES}
    flows, masses = mesh_flow_path(model, Mesh(8), 16)
    return {
        "model": "CT1",
        "generator": zoo.CT1_GENERATOR.tolist(),
        "potential": zoo.CT1_POTENTIAL.tolist(),
        "exact": {t: {"mass": v["mass"], "mu": v["mu"].tolist()} for t, v in exact.items()},
        "mesh_m8": {"flows": flows.tolist(), "masses": masses.tolist()},
    }


if __name__ == "__main__":
    out = Path(__file__).with_name("ct1.json")
    out.write_text(json.dumps(build(), indent=1) + "\n")
    print(out)
