"""Small scenario documents shared by the harness tests."""
import copy

BASE = {
    "schema": "mosaic-scenario/1",
    "name": "small",
    "network": {
        "layer_count": 2,
        "comm_radius": 6.0,
        "decay": 0.3,
        "agents": [
            {"id": 0, "layer": 0, "position": [0.0, 0.0], "max_step": 0.5},
            {"id": 1, "layer": 0, "position": [3.0, 1.0], "max_step": 0.5},
            {"id": 2, "layer": 1, "position": [5.0, -1.0], "max_step": 0.5},
            {"id": 3, "layer": 1, "position": [2.0, 4.0], "max_step": 0.5},
        ],
    },
    "total_steps": 6,
    "seed": 3,
}


def doc(**changes):
    d = copy.deepcopy(BASE)
    for k, v in changes.items():
        d[k] = v
    return d


def random_doc(seed=3, steps=5):
    d = doc(total_steps=steps, seed=seed)
    d["network"]["placement_box"] = [0.0, 0.0, 6.0, 6.0]
    for a in d["network"]["agents"]:
        del a["position"]
    return d
